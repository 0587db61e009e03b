//! Thin dense linear-algebra helpers over `ndarray` / LAPACK.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, Inverse, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Hermitian eigendecomposition with ascending eigenvalues; eigenvectors are
/// the columns of the returned matrix.
pub fn eigh(h: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    // ndarray-linalg returns conjugated eigenvectors for row-major complex
    // input, so hand it a column-major copy.
    let mut f = Array2::zeros(h.raw_dim().f());
    f.assign(h);
    f.eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("zheev failed: {e}")))
}

/// Lowest `k` eigenpairs of a Hermitian matrix (LAPACK `zheevr`, index
/// range), eigenvalues ascending.
pub fn eigh_lowest(h: &Array2<C64>, k: usize) -> Result<(Array1<f64>, Array2<C64>)> {
    use lapack_sys::__BindgenComplex as Lc;
    let n = h.nrows();
    if k == 0 || k > n || h.ncols() != n {
        return Err(Error::Parameter(format!("cannot take {k} eigenpairs of a {n}x{} matrix", h.ncols())));
    }
    let ni = n as i32;
    let mut a: Vec<C64> = h.t().iter().cloned().collect();
    let (vl, vu, il, iu, abstol) = (0.0f64, 0.0f64, 1i32, k as i32, 0.0f64);
    let mut m = 0i32;
    let mut w = vec![0.0f64; n];
    let mut z = vec![ZERO; n * k];
    let mut isuppz = vec![0i32; 2 * k.max(1)];
    let (jobz, range, uplo) = (b'V' as i8, b'I' as i8, b'L' as i8);
    let mut run = |work: &mut [C64], lwork: i32, rwork: &mut [f64], lrwork: i32, iwork: &mut [i32], liwork: i32| -> i32 {
        let mut info = 0i32;
        unsafe {
        lapack_sys::zheevr_(
            &jobz as *const i8 as *const _,
            &range as *const i8 as *const _,
            &uplo as *const i8 as *const _,
            &ni,
            a.as_mut_ptr() as *mut Lc<f64>,
            &ni,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m,
            w.as_mut_ptr(),
            z.as_mut_ptr() as *mut Lc<f64>,
            &ni,
            isuppz.as_mut_ptr(),
            work.as_mut_ptr() as *mut Lc<f64>,
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
        }
        info
    };
    let (mut qw, mut qr, mut qi) = ([ZERO], [0.0f64], [0i32]);
    let info = run(&mut qw, -1, &mut qr, -1, &mut qi, -1);
    if info != 0 {
        return Err(Error::Eigensolver(format!("zheevr workspace query failed: info {info}")));
    }
    let (lw, lr, li) = (qw[0].re as usize, qr[0] as usize, qi[0] as usize);
    let mut work = vec![ZERO; lw.max(1)];
    let mut rwork = vec![0.0f64; lr.max(1)];
    let mut iwork = vec![0i32; li.max(1)];
    let info = run(&mut work, lw as i32, &mut rwork, lr as i32, &mut iwork, li as i32);
    if info != 0 || m as usize != k {
        return Err(Error::Eigensolver(format!("zheevr failed: info {info}, {m} of {k} eigenpairs")));
    }
    let vecs = Array2::from_shape_vec((n, k).f(), z).expect("shape");
    Ok((Array1::from_vec(w[..k].to_vec()), vecs))
}

pub fn eigh_real(h: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    h.eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("dsyev failed: {e}")))
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, ONE)
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    ndarray::linalg::kron(a, b)
}

/// `max |a_ij|`.
pub fn max_abs(a: &ArrayView2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// `max |H - H†|`.
pub fn hermiticity_defect(h: &Array2<C64>) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((h[[i, j]] - h[[j, i]].conj()).norm());
        }
    }
    worst
}

/// `max |U†U - 1|`.
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    let g = dagger(u).dot(u) - identity(u.nrows());
    max_abs(&g.view())
}

/// `exp(-2πi·H·t)` for Hermitian `H` given in cyclic-frequency units (GHz) and
/// `t` in ns.
pub fn propagator(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let (w, v) = eigh(h)?;
    Ok(propagator_from_eigen(&w, &v, t))
}

pub fn propagator_from_eigen(w: &Array1<f64>, v: &Array2<C64>, t: f64) -> Array2<C64> {
    let phases = w.mapv(|e| C64::from_polar(1.0, -TAU * e * t));
    let mut scaled = v.clone();
    for (mut col, ph) in scaled.axis_iter_mut(Axis(1)).zip(phases.iter()) {
        col.mapv_inplace(|z| z * ph);
    }
    scaled.dot(&dagger(v))
}

/// `exp(-2πi·H·t)` by a Taylor series after removing the mean diagonal and
/// scaling to norm ≤ ½; the removed shift is restored as a global phase.
/// Suited to short steps where a dense eigensolve would dominate.
pub fn propagator_taylor(h: &Array2<C64>, t: f64) -> Array2<C64> {
    let n = h.nrows();
    let mu = h.diag().iter().map(|z| z.re).sum::<f64>() / n as f64;
    let mut a = h.mapv(|z| z * C64::new(0.0, -TAU * t));
    for k in 0..n {
        a[[k, k]] += C64::new(0.0, TAU * t * mu);
    }
    let norm = a.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    a.mapv_inplace(|z| z / 2f64.powi(squarings));
    // Degree-16 Taylor polynomial by Paterson–Stockmeyer in blocks of A⁴.
    let mut coef = [1.0f64; 17];
    for k in 1..17 {
        coef[k] = coef[k - 1] / k as f64;
    }
    let a2 = a.dot(&a);
    let a3 = a2.dot(&a);
    let a4 = a3.dot(&a);
    let powers = [identity(n), a, a2, a3];
    let block = |j: usize| -> Array2<C64> {
        let mut b = Array2::zeros((n, n));
        for (i, p) in powers.iter().enumerate() {
            if 4 * j + i <= 16 {
                b.scaled_add(C64::new(coef[4 * j + i], 0.0), p);
            }
        }
        b
    };
    let mut out = block(4);
    for j in (0..4).rev() {
        out = out.dot(&a4) + block(j);
    }
    for _ in 0..squarings {
        out = out.dot(&out);
    }
    out.mapv(|z| z * C64::from_polar(1.0, -TAU * t * mu))
}

/// Inverse of a real symmetric positive-definite matrix together with its
/// 2-norm condition number.
pub fn spd_inverse(m: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    let (w, _) = eigh_real(m)?;
    let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = w.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
    if lo <= 0.0 {
        return Err(Error::Parameter(format!(
            "capacitance matrix is not positive definite (min eigenvalue {lo:e})"
        )));
    }
    let inv = m
        .inv()
        .map_err(|e| Error::Parameter(format!("singular capacitance matrix: {e}")))?;
    Ok((inv, hi / lo))
}

/// Rotate `a` into the basis spanned by the columns of `v`: `v† a v`.
pub fn project(a: &Array2<C64>, v: &Array2<C64>) -> Array2<C64> {
    dagger(v).dot(&a.dot(v))
}

/// Reduce an angle to `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut y = x.rem_euclid(TAU);
    if y > pi {
        y -= TAU;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pauli_x_eigen() {
        let h = array![[ZERO, ONE], [ONE, ZERO]];
        let (w, _) = eigh(&h).unwrap();
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn partial_matches_full() {
        let n = 30;
        let h = Array2::from_shape_fn((n, n), |(i, j)| {
            let x = ((i * 7 + j * 3) % 11) as f64 - 5.0;
            let y = ((i * 5 + j * 13) % 7) as f64 - 3.0;
            C64::new(x + (((j * 7 + i * 3) % 11) as f64 - 5.0), y - (((j * 5 + i * 13) % 7) as f64 - 3.0))
        });
        let (w, _) = eigh(&h).unwrap();
        let (wl, v) = eigh_lowest(&h, 5).unwrap();
        for k in 0..5 {
            assert!((w[k] - wl[k]).abs() < 1e-10);
            let r = h.dot(&v.column(k)) - v.column(k).mapv(|z| z * wl[k]);
            assert!(r.iter().all(|z| z.norm() < 1e-9));
        }
    }

    #[test]
    fn wrap_range() {
        let pi = std::f64::consts::PI;
        assert!((wrap_angle(pi) - pi).abs() < 1e-15);
        assert!((wrap_angle(-pi) - pi).abs() < 1e-15);
        assert!((wrap_angle(3.0 * pi + 0.1) - (-pi + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn propagator_is_unitary() {
        let h = array![[C64::new(1.0, 0.0), C64::new(0.2, 0.3)], [C64::new(0.2, -0.3), C64::new(-0.5, 0.0)]];
        let u = propagator(&h, 0.37).unwrap();
        assert!(unitarity_defect(&u) < 1e-14);
    }

    #[test]
    fn complex_eigenvectors_satisfy_residual() {
        let n = 9;
        let h = Array2::from_shape_fn((n, n), |(i, j)| {
            let x = (i + 2 * j) as f64;
            let y = (2 * i + j) as f64;
            if i == j {
                C64::new(i as f64, 0.0)
            } else if i < j {
                C64::new(0.1 * (x + y).cos(), 0.3 * (x * y).sin())
            } else {
                C64::new(0.1 * (x + y).cos(), -0.3 * (x * y).sin())
            }
        });
        assert_eq!(hermiticity_defect(&h), 0.0);
        let (w, v) = eigh(&h).unwrap();
        let r = h.dot(&v) - v.dot(&Array2::from_diag(&w.mapv(|x| C64::new(x, 0.0))));
        assert!(max_abs(&r.view()) < 1e-12);
    }

    #[test]
    fn taylor_matches_eigen_propagator() {
        let n = 12;
        let h = Array2::from_shape_fn((n, n), |(i, j)| {
            let d = if i == j { 3.0 * i as f64 } else { 0.0 };
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            let im = if i < j { 0.1 * (a - b).sin() } else { -0.1 * (a - b).sin() };
            C64::new(d + 0.2 * (a + b).cos(), im)
        });
        for t in [0.0, 0.002, 0.05, 1.3] {
            let a = propagator(&h, t).unwrap();
            let b = propagator_taylor(&h, t);
            assert!(max_abs(&(a - &b).view()) < 1e-12, "t = {t}");
        }
    }
}
