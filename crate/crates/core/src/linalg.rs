//! Small dense complex linear algebra on the fixed 4x4 mode space.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

pub type Complex = num_complex::Complex<f64>;
pub type Mat4 = Matrix4<Complex>;
pub type Vec4 = Vector4<Complex>;

type Mat16 = SMatrix<Complex, 16, 16>;
type Vec16 = SVector<Complex, 16>;

pub(crate) const ZERO: Complex = Complex::new(0.0, 0.0);
pub(crate) const ONE: Complex = Complex::new(1.0, 0.0);
pub(crate) const I: Complex = Complex::new(0.0, 1.0);

#[inline]
pub(crate) fn re(x: f64) -> Complex {
    Complex::new(x, 0.0)
}

/// Index permutation exchanging `(a, b)` with `(a†, b†)`.
#[inline]
pub(crate) const fn swap_index(i: usize) -> usize {
    (i + 2) % 4
}

/// The symplectic form `[[0, 1], [-1, 0]]` in 2x2 blocks.
pub fn symplectic_form() -> Mat4 {
    let mut m = Mat4::zeros();
    m[(0, 2)] = ONE;
    m[(1, 3)] = ONE;
    m[(2, 0)] = -ONE;
    m[(3, 1)] = -ONE;
    m
}

/// The block swap `[[0, 1], [1, 0]]`.
pub fn block_swap() -> Mat4 {
    let mut m = Mat4::zeros();
    m[(0, 2)] = ONE;
    m[(1, 3)] = ONE;
    m[(2, 0)] = ONE;
    m[(3, 1)] = ONE;
    m
}

/// `G * conj(m) * G` with `G` the block swap, computed by index permutation.
pub fn conjugation_image(m: &Mat4) -> Mat4 {
    Mat4::from_fn(|i, j| m[(swap_index(i), swap_index(j))].conj())
}

/// `G * m^H * G`, the image of a second-moment matrix under hermitian
/// conjugation of every operator product.
pub fn adjoint_image(m: &Mat4) -> Mat4 {
    Mat4::from_fn(|i, j| m[(swap_index(j), swap_index(i))].conj())
}

pub fn max_abs(m: &Mat4) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    max_abs(&(a - b))
}

fn norm1(m: &Mat4) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3, 5, 7, 9 or 13.
pub fn expm(a: &Mat4) -> Mat4 {
    const THETA: [f64; 4] = [
        1.495585217958292e-2,
        2.539_398_330_063_23e-1,
        9.504178996162932e-1,
        2.097847961257068e0,
    ];
    const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
    const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
    const B7: [f64; 8] = [
        17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
    ];
    const B9: [f64; 10] = [
        17643225600.0,
        8821612800.0,
        2075673600.0,
        302702400.0,
        30270240.0,
        2162160.0,
        110880.0,
        3960.0,
        90.0,
        1.0,
    ];
    const B13: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;

    let id = Mat4::identity();
    let n1 = norm1(a);
    if n1 == 0.0 {
        return id;
    }

    let low_degree = |b: &[f64]| -> (Mat4, Mat4) {
        let a2 = a * a;
        let mut power = id;
        let mut u = Mat4::zeros();
        let mut v = Mat4::zeros();
        for (k, pair) in b.chunks(2).enumerate() {
            v += power * re(pair[0]);
            u += power * re(pair[1]);
            if k + 1 < b.len() / 2 {
                power *= a2;
            }
        }
        (a * u, v)
    };

    let (u, v, squarings) = if n1 <= THETA[0] {
        let (u, v) = low_degree(&B3);
        (u, v, 0)
    } else if n1 <= THETA[1] {
        let (u, v) = low_degree(&B5);
        (u, v, 0)
    } else if n1 <= THETA[2] {
        let (u, v) = low_degree(&B7);
        (u, v, 0)
    } else if n1 <= THETA[3] {
        let (u, v) = low_degree(&B9);
        (u, v, 0)
    } else {
        let s = if n1 > THETA13 {
            (n1 / THETA13).log2().ceil() as i32
        } else {
            0
        };
        let scaled = a * re(2f64.powi(-s));
        let a2 = scaled * scaled;
        let a4 = a2 * a2;
        let a6 = a4 * a2;
        let b = |k: usize| re(B13[k]);
        let u_inner = a6 * (a6 * b(13) + a4 * b(11) + a2 * b(9))
            + a6 * b(7)
            + a4 * b(5)
            + a2 * b(3)
            + id * b(1);
        let u = scaled * u_inner;
        let v = a6 * (a6 * b(12) + a4 * b(10) + a2 * b(8))
            + a6 * b(6)
            + a4 * b(4)
            + a2 * b(2)
            + id * b(0);
        (u, v, s)
    };

    let p = v + u;
    let q = v - u;
    let mut r = q.lu().solve(&p).unwrap_or(id);
    for _ in 0..squarings {
        r = r * r;
    }
    r
}

/// Factorized super-operator `X -> M X + X M^T` acting on 4x4 matrices.
#[derive(Clone, Debug)]
pub struct LyapunovOperator {
    lu: nalgebra::linalg::LU<Complex, nalgebra::Const<16>, nalgebra::Const<16>>,
}

impl LyapunovOperator {
    pub fn new(m: &Mat4) -> Result<Self> {
        let mut l = Mat16::zeros();
        for i in 0..4 {
            for j in 0..4 {
                let row = i + 4 * j;
                for k in 0..4 {
                    l[(row, k + 4 * j)] += m[(i, k)];
                    l[(row, i + 4 * k)] += m[(j, k)];
                }
            }
        }
        let lu = l.lu();
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for d in u.diagonal().iter() {
            lo = lo.min(d.norm());
            hi = hi.max(d.norm());
        }
        if !(hi > 0.0) || lo <= 1e-13 * hi {
            return Err(Error::SingularSystem);
        }
        Ok(Self { lu })
    }

    /// Solves `M X + X M^T = rhs`.
    pub fn solve(&self, rhs: &Mat4) -> Result<Mat4> {
        let b = Vec16::from_iterator(rhs.iter().copied());
        let x = self.lu.solve(&b).ok_or(Error::SingularSystem)?;
        Ok(Mat4::from_iterator(x.iter().copied()))
    }
}

/// `M X + X M^T`.
pub fn lyapunov_apply(m: &Mat4, x: &Mat4) -> Mat4 {
    m * x + x * m.transpose()
}

fn quadrature_map() -> Mat4 {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let mut u = Mat4::zeros();
    u[(0, 0)] = re(h);
    u[(0, 2)] = re(h);
    u[(1, 1)] = re(h);
    u[(1, 3)] = re(h);
    u[(2, 0)] = Complex::new(0.0, -h);
    u[(2, 2)] = Complex::new(0.0, h);
    u[(3, 1)] = Complex::new(0.0, -h);
    u[(3, 3)] = Complex::new(0.0, h);
    u
}

/// Eigenvalues of a generator that maps conjugation-symmetric vectors to
/// themselves (`m == G conj(m) G`).
///
/// Such a matrix is real in the quadrature basis `(x_a, x_b, p_a, p_b)`, so
/// the real Schur decomposition applies. Eigenvalues are sorted by real part
/// (descending), ties broken by imaginary part.
pub fn conjugation_symmetric_spectrum(m: &Mat4) -> [Complex; 4] {
    let u = quadrature_map();
    let r = u * m * u.adjoint();
    let real = Matrix4::<f64>::from_fn(|i, j| r[(i, j)].re);
    let ev = real.schur().complex_eigenvalues();
    let mut out = [ZERO; 4];
    for (o, e) in out.iter_mut().zip(ev.iter()) {
        *o = *e;
    }
    out.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(
                b.im.partial_cmp(&a.im)
                    .unwrap_or(core::cmp::Ordering::Equal),
            )
    });
    out
}

/// Eigenvector for an already known (simple) eigenvalue, by inverse iteration.
pub fn eigenvector(m: &Mat4, lambda: Complex) -> Option<Vec4> {
    let scale = 1.0 + lambda.norm() + max_abs(m);
    let shift = lambda + re(1e-11 * scale);
    let lu = (m - Mat4::identity() * shift).lu();
    let mut v = Vec4::new(re(1.0), re(0.8), re(0.6), re(0.4));
    for _ in 0..3 {
        let w = lu.solve(&v)?;
        let n = w.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        v = w / re(n);
    }
    Some(v)
}
