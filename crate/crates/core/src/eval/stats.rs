use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Outcome of a two-sided paired t-test on `a - b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub significant: bool,
    /// Differences were constant and non-zero: `t` is infinite, `p` is 0.
    pub degenerate: bool,
}

/// Two-sided paired Student's t-test with `n - 1` degrees of freedom.
pub fn paired_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Argument(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTest { t: 0.0, p: 1.0, df, significant: false, degenerate: false });
    }
    if var == 0.0 {
        return Ok(TTest {
            t: mean.signum() * f64::INFINITY,
            p: 0.0,
            df,
            significant: true,
            degenerate: true,
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::Argument(format!("t distribution: {e}")))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, p, df, significant: p < alpha, degenerate: false })
}
