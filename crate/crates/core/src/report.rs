//! Text serialisation of simulation output.

use std::io::{self, Write};

use crate::sim::{SeriesRow, SweepRow};

pub const SERIES_HEADER: &str = "t,vehicle_id,x,y,phi,v,a,u,ex,ev,lane,phase,ref_x,ref_y,lat_err";
pub const SWEEP_HEADER: &str = "ex,ev,converged,eta_percent,t_steady_s";

/// `x` with 9 significant digits, plain decimal when the exponent is
/// moderate, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: usize = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS as i32).contains(&exp) {
        let decimals = (DIGITS as i32 - 1 - exp).max(0) as usize;
        trim(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mantissa.to_string()), exp)
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

pub fn write_series<W: Write>(mut w: W, rows: &[SeriesRow]) -> io::Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_sig(r.t),
            r.vehicle_id,
            fmt_sig(r.x),
            fmt_sig(r.y),
            fmt_sig(r.phi),
            fmt_sig(r.v),
            fmt_sig(r.a),
            fmt_sig(r.u),
            opt(r.ex),
            opt(r.ev),
            r.lane,
            r.phase.map(|p| p.to_string()).unwrap_or_default(),
            opt(r.ref_x),
            opt(r.ref_y),
            opt(r.lat_err),
        )?;
    }
    Ok(())
}

pub fn write_sweep<W: Write>(mut w: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_sig(r.ex),
            fmt_sig(r.ev),
            r.converged,
            fmt_sig(r.eta_percent),
            opt(r.t_steady_s),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(-2.5), "-2.5");
        assert_eq!(fmt_sig(0.02), "0.02");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(173.20508075688772), "173.205081");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1.5e-7), "1.5e-7");
        assert_eq!(fmt_sig(2.0e12), "2e12");
        assert_eq!(fmt_sig(0.1 + 0.2), "0.3");
    }

    #[test]
    fn empty_series_is_just_the_header() {
        let mut buf = Vec::new();
        write_series(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{SERIES_HEADER}\n")
        );
    }

    #[test]
    fn sweep_rows() {
        let mut buf = Vec::new();
        let row = SweepRow {
            ex: -10.0,
            ev: 0.5,
            converged: true,
            eta_percent: 0.0,
            t_steady_s: None,
            collision: false,
        };
        write_sweep(&mut buf, &[row]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{SWEEP_HEADER}\n-10,0.5,true,0,\n")
        );
    }
}
