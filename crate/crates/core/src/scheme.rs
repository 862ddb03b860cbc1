//! Lax-Wendroff kernels for `u_t + f(u)_x = 0` on a uniform grid.
//!
//! Both functions advance the interior points `1..n-1` and copy the two end
//! points unchanged; boundary treatment belongs to the caller.

/// One Lax-Wendroff step for the linear flux `f = A u`.
pub fn lw_linear_step<const N: usize>(u: &[[f64; N]], a: &[[f64; N]; N], dxi: f64, dt: f64) -> Vec<[f64; N]> {
    let n = u.len();
    let mut out = u.to_vec();
    if n < 3 {
        return out;
    }
    let a2 = mat_mul(a, a);
    let c1 = dt / (2.0 * dxi);
    let c2 = dt * dt / (2.0 * dxi * dxi);
    for i in 1..n - 1 {
        let mut d1 = [0.0; N];
        let mut d2 = [0.0; N];
        for k in 0..N {
            d1[k] = u[i + 1][k] - u[i - 1][k];
            d2[k] = u[i + 1][k] - 2.0 * u[i][k] + u[i - 1][k];
        }
        let ad1 = mat_vec(a, &d1);
        let a2d2 = mat_vec(&a2, &d2);
        for k in 0..N {
            out[i][k] = u[i][k] - c1 * ad1[k] + c2 * a2d2[k];
        }
    }
    out
}

/// One Richtmyer two-step Lax-Wendroff step.
///
/// `flux(h, u)` is called with a half-index `h`: `2i` for node `i` at the
/// old time level and `2i + 1` for the midpoint `i + 1/2` at the half time
/// level. Position-dependent coefficients can be looked up from it.
pub fn richtmyer_step<const N: usize, F>(u: &[[f64; N]], flux: F, dxi: f64, dt: f64) -> Vec<[f64; N]>
where
    F: Fn(usize, &[f64; N]) -> [f64; N],
{
    let n = u.len();
    let mut out = u.to_vec();
    if n < 3 {
        return out;
    }
    let f: Vec<[f64; N]> = u.iter().enumerate().map(|(i, ui)| flux(2 * i, ui)).collect();
    let r = dt / dxi;
    let half: Vec<[f64; N]> = (0..n - 1)
        .map(|i| {
            let mut m = [0.0; N];
            for k in 0..N {
                m[k] = 0.5 * (u[i][k] + u[i + 1][k]) - 0.5 * r * (f[i + 1][k] - f[i][k]);
            }
            flux(2 * i + 1, &m)
        })
        .collect();
    for i in 1..n - 1 {
        for k in 0..N {
            out[i][k] = u[i][k] - r * (half[i][k] - half[i - 1][k]);
        }
    }
    out
}

fn mat_vec<const N: usize>(a: &[[f64; N]; N], x: &[f64; N]) -> [f64; N] {
    let mut y = [0.0; N];
    for (yi, row) in y.iter_mut().zip(a) {
        *yi = row.iter().zip(x).map(|(p, q)| p * q).sum();
    }
    y
}

fn mat_mul<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut c = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            c[i][j] = (0..N).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}
