//! Polynomials in `z` and `z̄` with exact derivatives.
//!
//! Used for custom problems and as randomized test fields with known
//! cogradients and Hessians.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CrError, Result};
use crate::hessian::HessianBlocks;
use crate::linalg::{CMatrix, CVector, C64};
use crate::wirtinger::{JacobianPair, ScalarField, VectorField, WirtingerPair};

/// `coef · Π_k z_k^{a_k} z̄_k^{b_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: C64,
    pub z_pow: Vec<u32>,
    pub zbar_pow: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Z(usize),
    Zbar(usize),
}

impl Term {
    pub fn eval(&self, z: &CVector) -> C64 {
        let mut v = self.coef;
        for (k, zk) in z.iter().enumerate() {
            if self.z_pow[k] > 0 {
                v *= zk.powu(self.z_pow[k]);
            }
            if self.zbar_pow[k] > 0 {
                v *= zk.conj().powu(self.zbar_pow[k]);
            }
        }
        v
    }

    fn deriv(&self, var: Var) -> Option<Term> {
        let mut t = self.clone();
        let (pow, k) = match var {
            Var::Z(k) => (&mut t.z_pow, k),
            Var::Zbar(k) => (&mut t.zbar_pow, k),
        };
        if pow[k] == 0 {
            return None;
        }
        t.coef *= pow[k] as f64;
        pow[k] -= 1;
        Some(t)
    }

    pub fn degree(&self) -> u32 {
        self.z_pow.iter().sum::<u32>() + self.zbar_pow.iter().sum::<u32>()
    }
}

/// A complex-valued polynomial `P(z, z̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoly {
    pub n: usize,
    pub terms: Vec<Term>,
}

impl ComplexPoly {
    pub fn new(n: usize, terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.z_pow.len() != n || t.zbar_pow.len() != n {
                return Err(CrError::Dimension(format!(
                    "polynomial term exponents must have length {n}"
                )));
            }
            if !(t.coef.re.is_finite() && t.coef.im.is_finite()) {
                return Err(CrError::InvalidArgument("non-finite polynomial coefficient".into()));
            }
        }
        Ok(Self { n, terms })
    }

    pub fn eval(&self, z: &CVector) -> C64 {
        self.terms.iter().map(|t| t.eval(z)).sum()
    }

    pub fn deriv(&self, var: Var) -> ComplexPoly {
        ComplexPoly {
            n: self.n,
            terms: self.terms.iter().filter_map(|t| t.deriv(var)).collect(),
        }
    }

    pub fn is_holomorphic(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.coef == C64::new(0.0, 0.0) || t.zbar_pow.iter().all(|&b| b == 0))
    }

    /// Random polynomial with `terms` monomials of total degree ≤ `max_deg`
    /// and standard complex Gaussian coefficients.
    pub fn random<R: Rng + ?Sized>(
        n: usize,
        terms: usize,
        max_deg: u32,
        holomorphic: bool,
        rng: &mut R,
    ) -> Self {
        let mut out = Vec::with_capacity(terms);
        for _ in 0..terms {
            let deg = rng.random_range(0..=max_deg);
            let mut z_pow = vec![0; n];
            let mut zbar_pow = vec![0; n];
            for _ in 0..deg {
                let k = rng.random_range(0..n);
                if holomorphic || rng.random_bool(0.5) {
                    z_pow[k] += 1;
                } else {
                    zbar_pow[k] += 1;
                }
            }
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            out.push(Term {
                coef: C64::new(re, im),
                z_pow,
                zbar_pow,
            });
        }
        ComplexPoly { n, terms: out }
    }
}

/// The real field `f = Re P`, with cogradients and Hessian blocks from
/// derivative polynomials computed once at construction.
#[derive(Debug, Clone)]
pub struct RealPolyField {
    p: ComplexPoly,
    dz: Vec<ComplexPoly>,
    dzb: Vec<ComplexPoly>,
    // second[a][b] for a, b in (Z(k) | Zbar(k)) flattened as index 2n.
    second: Vec<Vec<ComplexPoly>>,
}

impl RealPolyField {
    pub fn new(p: ComplexPoly) -> Self {
        let n = p.n;
        let vars: Vec<Var> = (0..n).map(Var::Z).chain((0..n).map(Var::Zbar)).collect();
        let dz: Vec<_> = (0..n).map(|k| p.deriv(Var::Z(k))).collect();
        let dzb: Vec<_> = (0..n).map(|k| p.deriv(Var::Zbar(k))).collect();
        let second = vars
            .iter()
            .map(|&a| {
                let first = p.deriv(a);
                vars.iter().map(|&b| first.deriv(b)).collect()
            })
            .collect();
        Self { p, dz, dzb, second }
    }

    pub fn poly(&self) -> &ComplexPoly {
        &self.p
    }

    fn d2(&self, a: Var, b: Var, z: &CVector) -> C64 {
        let n = self.p.n;
        let idx = |v: Var| match v {
            Var::Z(k) => k,
            Var::Zbar(k) => n + k,
        };
        self.second[idx(a)][idx(b)].eval(z)
    }
}

impl ScalarField for RealPolyField {
    fn dim(&self) -> usize {
        self.p.n
    }

    fn eval(&self, z: &CVector) -> f64 {
        self.p.eval(z).re
    }

    fn analytic_cogradients(&self, z: &CVector) -> Option<WirtingerPair> {
        let n = self.p.n;
        let dz = CVector::from_fn(n, |k, _| (self.dz[k].eval(z) + self.dzb[k].eval(z).conj()) * 0.5);
        let dzbar = CVector::from_fn(n, |k, _| (self.dzb[k].eval(z) + self.dz[k].eval(z).conj()) * 0.5);
        Some(WirtingerPair { dz, dzbar })
    }

    fn analytic_hessian(&self, z: &CVector) -> Option<HessianBlocks> {
        use Var::{Z, Zbar};
        let n = self.p.n;
        let blk = |first: fn(usize) -> Var, second: fn(usize) -> Var| {
            CMatrix::from_fn(n, n, |k, l| {
                // ∂/∂second_l of ∂f/∂first_k, with f = ½(P + P̄).
                let swap = |v: Var| match v {
                    Z(i) => Zbar(i),
                    Zbar(i) => Z(i),
                };
                let a = first(k);
                let b = second(l);
                (self.d2(a, b, z) + self.d2(swap(a), swap(b), z).conj()) * 0.5
            })
        };
        Some(HessianBlocks {
            hzz: blk(Zbar, Z),
            hzbz: blk(Zbar, Zbar),
            hzzb: blk(Z, Z),
            hzbzb: blk(Z, Zbar),
        })
    }
}

/// A polynomial map `ℂⁿ → ℂᵐ` with analytic Jacobian pair.
#[derive(Debug, Clone)]
pub struct PolyMap {
    components: Vec<ComplexPoly>,
    n: usize,
    jz: Vec<Vec<ComplexPoly>>,
    jzb: Vec<Vec<ComplexPoly>>,
}

impl PolyMap {
    pub fn new(n: usize, components: Vec<ComplexPoly>) -> Result<Self> {
        if components.is_empty() {
            return Err(CrError::InvalidArgument("polynomial map needs at least one component".into()));
        }
        if components.iter().any(|p| p.n != n) {
            return Err(CrError::Dimension("all components must share n".into()));
        }
        let jz = components
            .iter()
            .map(|p| (0..n).map(|k| p.deriv(Var::Z(k))).collect())
            .collect();
        let jzb = components
            .iter()
            .map(|p| (0..n).map(|k| p.deriv(Var::Zbar(k))).collect())
            .collect();
        Ok(Self {
            components,
            n,
            jz,
            jzb,
        })
    }

    pub fn components(&self) -> &[ComplexPoly] {
        &self.components
    }

    pub fn is_holomorphic(&self) -> bool {
        self.components.iter().all(|p| p.is_holomorphic())
    }
}

impl VectorField for PolyMap {
    fn dim_in(&self) -> usize {
        self.n
    }

    fn dim_out(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, z: &CVector) -> CVector {
        CVector::from_iterator(self.components.len(), self.components.iter().map(|p| p.eval(z)))
    }

    fn analytic_jacobians(&self, z: &CVector) -> Option<JacobianPair> {
        let m = self.components.len();
        Some(JacobianPair {
            j: CMatrix::from_fn(m, self.n, |i, k| self.jz[i][k].eval(z)),
            jc: CMatrix::from_fn(m, self.n, |i, k| self.jzb[i][k].eval(z)),
        })
    }
}
