//! Restarted GMRES on complex vectors viewed as real vectors of twice the
//! length (the Sherman–Lauricella operator is only real-linear).

use crate::C64;

fn dot(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn norm(a: &[C64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub solution: Vec<C64>,
    pub iterations: usize,
    /// Relative residual ‖b − A x‖ / ‖b‖ recomputed at the end.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `apply(x) = b` to relative residual `tol`.
pub fn gmres(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    b: &[C64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![C64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        return GmresOutcome {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let restart = restart.max(1);
    let mut iterations = 0;
    let mut r: Vec<C64> = b.to_vec();
    loop {
        let beta = norm(&r);
        if beta <= tol * bnorm || iterations >= max_iter {
            break;
        }
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns after Givens rotations
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let mut inner_converged = false;
        while basis.len() <= restart && iterations < max_iter {
            let k = basis.len() - 1;
            let mut w = apply(&basis[k]);
            iterations += 1;
            let mut col = vec![0.0; k + 2];
            // two passes of classical Gram-Schmidt
            for _ in 0..2 {
                for (j, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    col[j] += c;
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= vi * c;
                    }
                }
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for (j, &(c, s)) in cs.iter().enumerate() {
                let (a, b2) = (col[j], col[j + 1]);
                col[j] = c * a + s * b2;
                col[j + 1] = -s * a + c * b2;
            }
            let (a, b2) = (col[k], col[k + 1]);
            let rho = a.hypot(b2);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, b2 / rho) };
            col[k] = rho;
            col[k + 1] = 0.0;
            cs.push((c, s));
            let gk = g[k];
            g[k] = c * gk;
            g.push(-s * gk);
            h.push(col);
            if g[k + 1].abs() <= tol * bnorm || wn == 0.0 {
                inner_converged = true;
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution
        let m = h.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut s = g[i];
            for j in i + 1..m {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[j]) {
                *xi += vi * *yj;
            }
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        // otherwise restart from the current iterate, also when the
        // recurrence claimed convergence but the true residual lags
        if inner_converged && norm(&r) <= tol * bnorm {
            break;
        }
    }
    let relative_residual = norm(&r) / bnorm;
    GmresOutcome {
        solution: x,
        iterations,
        relative_residual,
        converged: relative_residual <= tol,
    }
}
