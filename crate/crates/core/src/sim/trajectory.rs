use std::io::{self, Write};

use super::engine::RunStatus;

pub const CSV_HEADER: &str = "t,x_c,y_c,psi,x_e,r_c,alpha,delta,f,u_c,u_dir,u_zeta,v1,v2";

/// One output sample of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// Heading wrapped to (-pi, pi].
    pub psi: f64,
    pub filter: f64,
    pub range: f64,
    pub alpha: f64,
    /// Measurement seen by the controller (after rejection and hold).
    pub delta: f64,
    pub cost: f64,
    pub surge: f64,
    /// Applied direction factor.
    pub direction: f64,
    pub damping: f64,
    pub v1: f64,
    pub v2: f64,
}

impl Record {
    fn fields(&self) -> [f64; 14] {
        [
            self.t,
            self.x,
            self.y,
            self.psi,
            self.filter,
            self.range,
            self.alpha,
            self.delta,
            self.cost,
            self.surge,
            self.direction,
            self.damping,
            self.v1,
            self.v2,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Uniformly spaced samples, every `decimation` integration steps.
    pub records: Vec<Record>,
    /// State at termination; equals the last record when it falls on the output grid.
    pub terminal: Record,
    pub status: RunStatus,
    pub sample_period: f64,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        let mut line = String::with_capacity(256);
        for r in &self.records {
            line.clear();
            for (i, v) in r.fields().iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format_sig9(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }
}

/// Formats with 9 significant digits, `%.9g` style.
pub fn format_sig9(v: f64) -> String {
    const DIGITS: i32 = 9;
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
