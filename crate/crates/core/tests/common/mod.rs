//! Test-side reference algorithms, written against plain `Vec<Complex64>`
//! row-major matrices so they share no code path with the library's linear
//! algebra.

#![allow(dead_code)]

use num_complex::Complex64 as C;

pub type Mat = Vec<Vec<C>>;

pub fn zeros(n: usize) -> Mat {
    vec![vec![C::new(0.0, 0.0); n]; n]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

pub fn from_lib(m: &nalgebra::DMatrix<C>) -> Mat {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat, s: C) -> Mat {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + s * y).collect()).collect()
}

pub fn scale(a: &Mat, s: C) -> Mat {
    a.iter().map(|r| r.iter().map(|x| x * s).collect()).collect()
}

pub fn dagger(a: &Mat) -> Mat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| a[j][i].conj()).collect()).collect()
}

pub fn trace(a: &Mat) -> C {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn matvec(a: &Mat, x: &[C]) -> Vec<C> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn norm1(a: &Mat) -> f64 {
    (0..a.len()).map(|j| a.iter().map(|r| r[j].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Lindblad generator applied to ρ, term by term.
pub fn lindblad(h: &Mat, ls: &[Mat], rho: &Mat) -> Mat {
    tilted_lindblad(h, ls, &vec![1.0; ls.len()], rho)
}

/// Generator with the jump term of channel k scaled by `weights[k]`.
pub fn tilted_lindblad(h: &Mat, ls: &[Mat], weights: &[f64], rho: &Mat) -> Mat {
    let i = C::new(0.0, 1.0);
    let comm = add(&mul(h, rho), &mul(rho, h), C::new(-1.0, 0.0));
    let mut out = scale(&comm, -i);
    for (l, &w) in ls.iter().zip(weights) {
        let ld = dagger(l);
        let ldl = mul(&ld, l);
        out = add(&out, &mul(&mul(l, rho), &ld), C::new(w, 0.0));
        out = add(&out, &mul(&ldl, rho), C::new(-0.5, 0.0));
        out = add(&out, &mul(rho, &ldl), C::new(-0.5, 0.0));
    }
    out
}

/// Superoperator matrix on row-stacked vec(ρ), built column by column from
/// the generator on matrix units.
pub fn superoperator(h: &Mat, ls: &[Mat]) -> Mat {
    tilted_superoperator(h, ls, &vec![1.0; ls.len()])
}

pub fn tilted_superoperator(h: &Mat, ls: &[Mat], weights: &[f64]) -> Mat {
    let d = h.len();
    let n = d * d;
    let mut s = zeros(n);
    for a in 0..d {
        for b in 0..d {
            let mut e = zeros(d);
            e[a][b] = C::new(1.0, 0.0);
            let out = tilted_lindblad(h, ls, weights, &e);
            for r in 0..d {
                for c in 0..d {
                    s[r * d + c][a * d + b] = out[r][c];
                }
            }
        }
    }
    s
}

/// Characteristic polynomial coefficients c_0..c_n (monic, c_n = 1) via
/// Faddeev–LeVerrier.
pub fn char_poly(a: &Mat) -> Vec<C> {
    let n = a.len();
    let mut coeffs = vec![C::new(0.0, 0.0); n + 1];
    coeffs[n] = C::new(1.0, 0.0);
    let mut m = zeros(n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let am = mul(a, &m);
        m = add(&am, &identity(n), coeffs[n - k + 1]);
        let amk = mul(a, &m);
        coeffs[n - k] = -trace(&amk) / k as f64;
    }
    coeffs
}

/// All roots of a monic polynomial by Durand–Kerner iteration.
pub fn poly_roots(coeffs: &[C]) -> Vec<C> {
    let n = coeffs.len() - 1;
    let eval = |z: C| coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + c);
    let seed = C::new(0.4, 0.9);
    let radius = 1.0 + coeffs.iter().take(n).map(|c| c.norm()).fold(0.0, f64::max);
    let mut roots: Vec<C> = (0..n).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..5000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = C::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / den;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    // polish with Newton on the polynomial
    let deriv: Vec<C> = (1..=n).map(|k| coeffs[k] * k as f64).collect();
    let eval_d = |z: C| deriv.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + c);
    for r in roots.iter_mut() {
        for _ in 0..5 {
            let d = eval_d(*r);
            if d.norm() > 0.0 {
                *r -= eval(*r) / d;
            }
        }
    }
    roots
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat, b: &[C]) -> Vec<C> {
    let n = a.len();
    let mut m: Vec<Vec<C>> = a.iter().zip(b).map(|(r, bi)| r.iter().copied().chain([*bi]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].norm().total_cmp(&m[j][col].norm())).unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        for r in 0..n {
            if r != col {
                let f = m[r][col] / p;
                if f != C::new(0.0, 0.0) {
                    for c in col..=n {
                        let v = m[col][c];
                        m[r][c] -= f * v;
                    }
                }
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

/// Steady state of the superoperator (row-stacked) by replacing one
/// equation with the trace condition.
pub fn null_space_steady_state(h: &Mat, ls: &[Mat]) -> Mat {
    let d = h.len();
    let mut s = superoperator(h, ls);
    let mut rhs = vec![C::new(0.0, 0.0); d * d];
    for c in 0..d * d {
        s[0][c] = C::new(0.0, 0.0);
    }
    for i in 0..d {
        s[0][i * d + i] = C::new(1.0, 0.0);
    }
    rhs[0] = C::new(1.0, 0.0);
    let v = solve(&s, &rhs);
    (0..d).map(|r| (0..d).map(|c| v[r * d + c]).collect()).collect()
}

/// Eigenvalues of a 2×2 Hermitian matrix, descending, and matching unit
/// eigenvectors.
pub fn hermitian_eig2(m: &Mat) -> ([f64; 2], [[C; 2]; 2]) {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = m[0][1];
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    let vals = [mean + r, mean - r];
    let mut vecs = [[C::new(0.0, 0.0); 2]; 2];
    for (k, &lam) in vals.iter().enumerate() {
        // (A − λ) v = 0  ⇒ v ∝ (b, λ − a) or (λ − d, b̄)
        let v1 = [b, C::new(lam - a, 0.0)];
        let v2 = [C::new(lam - d, 0.0), b.conj()];
        let pick = if v1[0].norm() + v1[1].norm() >= v2[0].norm() + v2[1].norm() { v1 } else { v2 };
        let n = (pick[0].norm_sqr() + pick[1].norm_sqr()).sqrt();
        vecs[k] = if n > 0.0 { [pick[0] / n, pick[1] / n] } else if k == 0 { [C::new(1.0, 0.0), C::new(0.0, 0.0)] } else { [C::new(0.0, 0.0), C::new(1.0, 0.0)] };
    }
    (vals, vecs)
}

/// exp(A) by scaling and squaring with a 30-term Taylor series.
pub fn expm_taylor(a: &Mat) -> Mat {
    let n = a.len();
    let norm = norm1(a);
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.5 {
        s += 1;
    }
    let scaled = scale(a, C::new(1.0 / 2f64.powi(s as i32), 0.0));
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=30 {
        term = scale(&mul(&term, &scaled), C::new(1.0 / k as f64, 0.0));
        sum = add(&sum, &term, C::new(1.0, 0.0));
    }
    for _ in 0..s {
        sum = mul(&sum, &sum);
    }
    sum
}

/// ρ(t) = e^{𝓛 t} ρ(0) through the row-stacked superoperator exponential.
pub fn propagate(h: &Mat, ls: &[Mat], rho0: &Mat, t: f64) -> Mat {
    let d = h.len();
    let s = scale(&superoperator(h, ls), C::new(t, 0.0));
    let e = expm_taylor(&s);
    let v: Vec<C> = (0..d * d).map(|k| rho0[k / d][k % d]).collect();
    let out = matvec(&e, &v);
    (0..d).map(|r| (0..d).map(|c| out[r * d + c]).collect()).collect()
}

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Qubit preset operators built from the stated rates, independently of the
/// library's preset.
pub fn qubit_ops(omega: f64, rates: [f64; 4]) -> (Mat, Vec<Mat>) {
    let h = vec![vec![c(omega / 2.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-omega / 2.0, 0.0)]];
    let sm = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
    let sp = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    // (σz ∓ iσy)/2 with σy = [[0, −i], [i, 0]]
    let xm = vec![vec![c(0.5, 0.0), c(-0.5, 0.0)], vec![c(0.5, 0.0), c(-0.5, 0.0)]];
    let xp = vec![vec![c(0.5, 0.0), c(0.5, 0.0)], vec![c(-0.5, 0.0), c(-0.5, 0.0)]];
    let ls = [sm, sp, xm, xp]
        .into_iter()
        .zip(rates)
        .map(|(m, g)| scale(&m, c(g.sqrt(), 0.0)))
        .collect();
    (h, ls)
}

/// Rates from the gap and the ratio e^{x}: γ_big = Γ / (1 − e^{−x}).
pub fn rates_from_gap(gap: f64, x: f64) -> (f64, f64) {
    let big = gap / (1.0 - (-x).exp());
    (big, big * (-x).exp())
}
