//! Projection of a point onto an intersection of halfspaces in 3D.
//!
//! Primal active-set walk from a feasible start: move toward the target
//! inside the working set until a constraint blocks, add it, and drop
//! constraints whose multipliers turn negative once the walk stalls.

use nalgebra::{DMatrix, DVector};

use crate::geom::Vec3;

/// `a . x >= b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Halfspace {
    pub a: Vec3,
    pub b: f64,
}

impl Halfspace {
    pub fn new(a: Vec3, b: f64) -> Self {
        Halfspace { a, b }
    }

    pub fn slack(&self, x: &Vec3) -> f64 {
        self.a.dot(x) - self.b
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvexQP {
    pub target: Vec3,
    pub halfspaces: Vec<Halfspace>,
}

impl ConvexQP {
    pub fn new(target: Vec3) -> Self {
        ConvexQP {
            target,
            halfspaces: Vec::new(),
        }
    }

    pub fn push(&mut self, a: Vec3, b: f64) {
        self.halfspaces.push(Halfspace::new(a, b));
    }
}

const STEP_EPS: f64 = 1e-14;
const MULT_EPS: f64 = 1e-12;

/// Minimizes `|x - target|^2` over the halfspaces, starting from the
/// feasible point `start`. Returns a feasible point (up to rounding).
pub fn solve_projection_qp(q: &ConvexQP, start: &Vec3) -> Vec3 {
    // Unit normals make the tolerances scale-free; zero rows are vacuous.
    let cons: Vec<Halfspace> = q
        .halfspaces
        .iter()
        .filter_map(|h| {
            let n = h.a.norm();
            (n > 0.0).then(|| Halfspace::new(h.a / n, h.b / n))
        })
        .collect();
    let t = q.target;
    let mut x = *start;
    let mut work: Vec<usize> = Vec::with_capacity(3);
    let max_iter = 8 * (cons.len() + 4);
    for _ in 0..max_iter {
        let p = project_to_null(&cons, &work, &(t - x));
        let scale = (t - x).norm();
        if p.norm() <= 1e-13 * (x.norm() + t.norm()) {
            // Stalled inside the working set: check multipliers.
            if work.is_empty() {
                return x;
            }
            let lambda = multipliers(&cons, &work, &(x - t));
            let (worst, &lmin) = lambda
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty working set");
            if lmin >= -MULT_EPS * scale {
                return x;
            }
            work.remove(worst);
            continue;
        }
        let mut alpha = 1.0;
        let mut block = None;
        for (i, c) in cons.iter().enumerate() {
            if work.contains(&i) {
                continue;
            }
            let ap = c.a.dot(&p);
            if ap < -STEP_EPS * p.norm() {
                let s = ((c.b - c.a.dot(&x)) / ap).max(0.0);
                if s < alpha {
                    alpha = s;
                    block = Some(i);
                }
            }
        }
        x += p * alpha;
        match block {
            Some(i) => work.push(i),
            None => {
                if work.is_empty() {
                    return t;
                }
            }
        }
    }
    x
}

/// Component of `r` orthogonal to every working-set normal.
fn project_to_null(cons: &[Halfspace], work: &[usize], r: &Vec3) -> Vec3 {
    let mut basis: Vec<Vec3> = Vec::with_capacity(3);
    for &i in work {
        let mut a = cons[i].a;
        for q in &basis {
            a -= q * q.dot(&a);
        }
        let n = a.norm();
        if n > 1e-12 {
            basis.push(a / n);
        }
    }
    if basis.len() >= 3 {
        return Vec3::zeros();
    }
    let mut p = *r;
    for q in &basis {
        p -= q * q.dot(&p);
    }
    p
}

/// Solves `Gram * lambda = A_W g` in the least-squares sense.
fn multipliers(cons: &[Halfspace], work: &[usize], g: &Vec3) -> Vec<f64> {
    let k = work.len();
    let a = DMatrix::from_fn(3, k, |r, c| cons[work[c]].a[r]);
    let rhs = DVector::from_column_slice(g.as_slice());
    let svd = a.svd(true, true);
    let lam = svd
        .solve(&rhs, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(k));
    lam.iter().copied().collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive oracle: best feasible projection onto the affine hull of
    /// every subset of at most three constraints.
    pub fn oracle(q: &ConvexQP) -> Vec3 {
        let cons = &q.halfspaces;
        let feasible = |x: &Vec3| cons.iter().all(|c| c.slack(x) >= -1e-9 * c.a.norm());
        let mut best = None::<(f64, Vec3)>;
        let mut consider = |x: Vec3| {
            if feasible(&x) {
                let d = (x - q.target).norm_squared();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, x));
                }
            }
        };
        consider(q.target);
        let m = cons.len();
        let proj = |sel: &[usize]| -> Option<Vec3> {
            let k = sel.len();
            let a = DMatrix::from_fn(k, 3, |r, c| cons[sel[r]].a[c]);
            let b = DVector::from_fn(k, |r, _| cons[sel[r]].b);
            let t = DVector::from_column_slice(q.target.as_slice());
            // x = t - A^T (A A^T)^{-1} (A t - b)
            let g = &a * a.transpose();
            let y = g.lu().solve(&(&a * &t - b))?;
            if !y.iter().all(|v| v.is_finite()) {
                return None;
            }
            let x = t - a.transpose() * y;
            Some(Vec3::new(x[0], x[1], x[2]))
        };
        for i in 0..m {
            if let Some(x) = proj(&[i]) {
                consider(x);
            }
            for j in i + 1..m {
                if let Some(x) = proj(&[i, j]) {
                    consider(x);
                }
                for k in j + 1..m {
                    if let Some(x) = proj(&[i, j, k]) {
                        consider(x);
                    }
                }
            }
        }
        best.expect("target or some vertex is feasible").1
    }

    pub fn random_instance(rng: &mut ChaCha8Rng, m: usize) -> (ConvexQP, Vec3) {
        let mut v = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let start = v();
        let mut q = ConvexQP::new(v() * 2.0);
        for _ in 0..m {
            let a = v();
            q.push(a, 0.0);
        }
        for h in &mut q.halfspaces {
            h.b = h.a.dot(&start) - rng.random_range(0.0..0.5);
        }
        // A few constraints exactly tight at the start.
        if m > 0 && rng.random_bool(0.5) {
            let h = &mut q.halfspaces[0];
            h.b = h.a.dot(&start);
        }
        (q, start)
    }

    #[test]
    fn unconstrained_returns_target() {
        let q = ConvexQP::new(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(solve_projection_qp(&q, &Vec3::zeros()), q.target);
    }

    #[test]
    fn single_halfspace() {
        let mut q = ConvexQP::new(Vec3::new(-1.0, 0.0, 0.0));
        q.push(Vec3::x(), 0.0);
        let x = solve_projection_qp(&q, &Vec3::new(1.0, 0.0, 0.0));
        assert!(x.norm() < 1e-15);
    }

    #[test]
    fn corner_of_three_planes() {
        let mut q = ConvexQP::new(Vec3::repeat(-1.0));
        q.push(Vec3::x(), 0.0);
        q.push(Vec3::y(), 0.0);
        q.push(Vec3::z(), 0.0);
        let x = solve_projection_qp(&q, &Vec3::repeat(1.0));
        assert!(x.norm() < 1e-15);
    }

    #[test]
    fn drops_constraint_with_negative_multiplier() {
        // Walk hits y >= 0 first, but the optimum only needs x >= 0.
        let mut q = ConvexQP::new(Vec3::new(-1.0, 5.0, 0.0));
        q.push(Vec3::x(), 0.0);
        q.push(Vec3::new(1.0, 1.0, 0.0), 0.0);
        let x = solve_projection_qp(&q, &Vec3::new(1.0, -0.5, 0.0));
        assert!((x - Vec3::new(0.0, 5.0, 0.0)).norm() < 1e-12, "{x:?}");
    }

    #[test]
    fn matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for it in 0..300 {
            let m = it % 31;
            let (q, s) = random_instance(&mut rng, m);
            let x = solve_projection_qp(&q, &s);
            let o = oracle(&q);
            assert!((x - o).norm() < 1e-6, "m={m} x={x:?} oracle={o:?}");
        }
    }
}
