// Small fixed-size dense linear algebra used by the ellipse fit and the PS axis.

use crate::math;

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse by cofactors; `None` when the determinant is not finite or is
/// negligible relative to the entry scale.
pub fn inv3(m: &Mat3) -> Option<Mat3> {
    let d = det3(m);
    let scale = m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    if !d.is_finite() || scale == 0.0 || d.abs() <= 1e-14 * scale * scale * scale {
        return None;
    }
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
        [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
        [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
    ];
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = adj[i][j] / d;
        }
    }
    Some(out)
}

pub fn mul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose3(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat_vec3(a: &Mat3, v: &Vec3) -> Vec3 {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm3(v: &Vec3) -> f64 {
    math::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

/// Real roots of `x³ + a x² + b x + c`, each polished by Newton steps.
pub fn cubic_real_roots(a: f64, b: f64, c: f64) -> ([f64; 3], usize) {
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let mut roots = [0.0; 3];
    let n;
    if r * r < q * q * q {
        let theta = math::acos((r / math::sqrt(q * q * q)).clamp(-1.0, 1.0));
        let s = -2.0 * math::sqrt(q);
        let tau = core::f64::consts::TAU;
        roots[0] = s * math::cos(theta / 3.0) - a / 3.0;
        roots[1] = s * math::cos((theta + tau) / 3.0) - a / 3.0;
        roots[2] = s * math::cos((theta - tau) / 3.0) - a / 3.0;
        n = 3;
    } else {
        let big_a = -r.signum() * math::cbrt(r.abs() + math::sqrt(r * r - q * q * q));
        let big_b = if big_a != 0.0 { q / big_a } else { 0.0 };
        roots[0] = big_a + big_b - a / 3.0;
        n = 1;
    }
    for root in roots.iter_mut().take(n) {
        for _ in 0..4 {
            let x = *root;
            let f = ((x + a) * x + b) * x + c;
            let df = (3.0 * x + 2.0 * a) * x + b;
            if df == 0.0 {
                break;
            }
            let next = x - f / df;
            if !next.is_finite() {
                break;
            }
            *root = next;
        }
    }
    (roots, n)
}

/// Real eigenpairs of a general 3×3 matrix. Eigenvectors come from the
/// largest cross product of two rows of `M − λI`, so they are exact for
/// simple eigenvalues.
pub fn eigen3(m: &Mat3) -> ([(f64, Vec3); 3], usize) {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = det3(m);
    let (roots, n) = cubic_real_roots(-tr, minors, -det);
    let mut out = [(0.0, [0.0; 3]); 3];
    for (k, &lambda) in roots.iter().take(n).enumerate() {
        let mut shifted = *m;
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] -= lambda;
        }
        let candidates = [
            cross3(&shifted[0], &shifted[1]),
            cross3(&shifted[0], &shifted[2]),
            cross3(&shifted[1], &shifted[2]),
        ];
        let best = candidates
            .iter()
            .copied()
            .max_by(|x, y| norm3(x).total_cmp(&norm3(y)))
            .unwrap_or([0.0; 3]);
        let len = norm3(&best);
        let v = if len > 0.0 { [best[0] / len, best[1] / len, best[2] / len] } else { best };
        out[k] = (lambda, v);
    }
    (out, n)
}

/// Eigen-decomposition of the symmetric matrix `[[a, b], [b, c]]`:
/// returns `(λ_max, λ_min, unit eigenvector of λ_max)`.
pub fn sym2_eigen(a: f64, b: f64, c: f64) -> (f64, f64, [f64; 2]) {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let rad = math::hypot(half_diff, b);
    let l_max = mean + rad;
    let l_min = mean - rad;
    // Principal direction angle: tan(2φ) = 2b / (a − c).
    let phi = 0.5 * math::atan2(2.0 * b, a - c);
    (l_max, l_min, [math::cos(phi), math::sin(phi)])
}
