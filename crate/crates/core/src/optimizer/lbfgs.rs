//! Limited-memory BFGS on an inner-product space supplied by the caller.
//!
//! The two-loop recursion is generic over the vector type and the metric,
//! so the same code runs on volume deformation fields with the elasticity
//! product, on interface densities with the Sobolev product, and on plain
//! Euclidean vectors in the tests.

use std::collections::VecDeque;

/// Minimal vector arithmetic the recursion needs.
pub trait TangentVector: Clone {
    /// `self += alpha * other`.
    fn axpy(&mut self, alpha: f64, other: &Self);
    fn scale(&mut self, alpha: f64);
}

impl TangentVector for Vec<f64> {
    fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            *a += alpha * b;
        }
    }
    fn scale(&mut self, alpha: f64) {
        for a in self.iter_mut() {
            *a *= alpha;
        }
    }
}

impl TangentVector for crate::mesh::DeformField {
    fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a[0] += alpha * b[0];
            a[1] += alpha * b[1];
        }
    }
    fn scale(&mut self, alpha: f64) {
        for a in self.values.iter_mut() {
            a[0] *= alpha;
            a[1] *= alpha;
        }
    }
}

struct Pair<V> {
    s: V,
    y: V,
    /// `1 / <y, s>` in the caller's metric.
    rho: f64,
}

/// Ring buffer of update pairs. Pairs whose curvature fails the
/// positivity guard are skipped on storage, which keeps the implicit
/// inverse Hessian positive definite.
pub struct LbfgsMemory<V> {
    capacity: usize,
    pairs: VecDeque<Pair<V>>,
}

impl<V: TangentVector> LbfgsMemory<V> {
    /// `capacity` 0 means unbounded (full BFGS via the same recursion).
    pub fn new(capacity: usize) -> Self {
        LbfgsMemory { capacity, pairs: VecDeque::new() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Applies the vector transport to every stored pair, carrying the
    /// memory onto the current iterate before products are taken.
    pub fn transport_pairs(&mut self, mut f: impl FnMut(&mut V)) {
        for pair in &mut self.pairs {
            f(&mut pair.s);
            f(&mut pair.y);
        }
    }

    /// Stores a pair when its curvature `<y, s>` clears the relative
    /// threshold; returns whether it was stored. Oldest pair is evicted at
    /// capacity.
    pub fn update<F>(&mut self, s: V, y: V, inner: F) -> bool
    where
        F: Fn(&V, &V) -> f64,
    {
        let curvature = inner(&y, &s);
        let threshold = 1e-12 * (inner(&y, &y) * inner(&s, &s)).sqrt();
        if !(curvature > threshold) {
            log::debug!("lbfgs pair skipped: curvature {curvature:.3e} below {threshold:.3e}");
            return false;
        }
        if self.capacity > 0 && self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(Pair { s, y, rho: 1.0 / curvature });
        true
    }

    /// Two-loop recursion: returns `q ~ H grad` where `H` is the implicit
    /// inverse Hessian with initial scaling `<y,s>/<y,y>` from the newest
    /// pair. With empty memory, `q = grad`.
    pub fn direction<F>(&self, grad: &V, inner: F) -> V
    where
        F: Fn(&V, &V) -> f64,
    {
        let mut q = grad.clone();
        if self.pairs.is_empty() {
            return q;
        }
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for pair in self.pairs.iter().rev() {
            let alpha = pair.rho * inner(&pair.s, &q);
            q.axpy(-alpha, &pair.y);
            alphas.push(alpha);
        }
        let newest = self.pairs.back().unwrap();
        q.scale(1.0 / (newest.rho * inner(&newest.y, &newest.y)));
        for (pair, &alpha) in self.pairs.iter().zip(alphas.iter().rev()) {
            let beta = pair.rho * inner(&pair.y, &q);
            q.axpy(alpha - beta, &pair.s);
        }
        q
    }
}
