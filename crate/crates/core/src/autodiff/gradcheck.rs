//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates the forward pass, so it is an
//! independent check of every backward rule the closure exercises.

use super::{AutodiffError, Tape, Tensor, Var};

/// Denominator floor for the relative error: below this magnitude both
/// gradients are treated as zero and the absolute difference is compared.
pub const REL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (parameter index, flat entry index) of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

fn eval<F>(params: &[Tensor], f: &F) -> Result<(Tape, Vec<Var>, Var), AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let mut tape = Tape::new();
    let vars = params.iter().map(|p| tape.param(p.clone())).collect::<Result<Vec<_>, _>>()?;
    let loss = f(&mut tape, &vars)?;
    Ok((tape, vars, loss))
}

/// Compares the tape's gradients of the scalar built by `f` against central
/// differences with step `h`. At most `max_entries` entries per parameter
/// are probed (evenly strided) when given.
pub fn check<F>(
    params: &[Tensor],
    f: F,
    h: f64,
    max_entries: Option<usize>,
) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let (mut tape, vars, loss) = eval(params, &f)?;
    let grads = tape.backward(loss)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };
    let mut work = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let analytic = grads.wrt(vars[pi], p.shape());
        let n = p.len();
        let step = max_entries.map_or(1, |m| n.div_ceil(m.max(1)));
        for idx in (0..n).step_by(step) {
            let orig = p.data()[idx];
            work[pi].data_mut()[idx] = orig + h;
            let (t_plus, _, l_plus) = eval(&work, &f)?;
            work[pi].data_mut()[idx] = orig - h;
            let (t_minus, _, l_minus) = eval(&work, &f)?;
            work[pi].data_mut()[idx] = orig;
            let numeric = (t_plus.value(l_plus).data()[0] - t_minus.value(l_minus).data()[0]) / (2.0 * h);
            let a = analytic.data()[idx];
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (pi, idx);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
