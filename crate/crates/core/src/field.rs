//! Scalar and vector fields on ℝⁿ.
//!
//! A field reports values (NaN outside its domain) and, where available, the
//! Jacobian of the smooth piece containing the point. Points where no piece
//! is smooth (kinks, null pieces) report `false` from [`Field::jacobian_into`];
//! they form a λ-null set for every corpus field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, MAX_DIM};

pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    fn outputs(&self) -> usize;

    /// Writes the `outputs()` values at `p`; NaN marks points outside the domain.
    fn eval_into(&self, p: &[f64], out: &mut [f64]);

    /// Writes values and the row-major `outputs() × dim()` Jacobian. Returns
    /// true iff `p` is an interior point of a smooth piece.
    fn jacobian_into(&self, p: &[f64], val: &mut [f64], jac: &mut [f64]) -> bool;

    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }

    /// First component at `p`.
    fn value(&self, p: &[f64]) -> f64 {
        let mut out = [0.0; MAX_DIM];
        self.eval_into(p, &mut out[..self.outputs()]);
        out[0]
    }

    fn values(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs()];
        self.eval_into(p, &mut out);
        out
    }

    /// Jacobian at `p` if `p` is a smooth point.
    fn jacobian(&self, p: &[f64]) -> Option<Vec<f64>> {
        let mut val = vec![0.0; self.outputs()];
        let mut jac = vec![0.0; self.outputs() * self.dim()];
        self.jacobian_into(p, &mut val, &mut jac).then_some(jac)
    }
}

/// Field given by one closed-form expression per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseField {
    pub dim: usize,
    pub components: Vec<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

impl PiecewiseField {
    pub fn scalar(dim: usize, expr: Expr) -> Result<Self> {
        Self::vector(dim, vec![expr])
    }

    pub fn vector(dim: usize, components: Vec<Expr>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if components.is_empty() || components.len() > MAX_DIM {
            return Err(Error::invalid("need between 1 and 8 components"));
        }
        if let Some(e) = components.iter().find(|e| e.arity() > dim) {
            return Err(Error::invalid(format!(
                "expression {e} uses a variable beyond dimension {dim}"
            )));
        }
        Ok(PiecewiseField {
            dim,
            components,
            lipschitz: None,
        })
    }

    pub fn parse(dim: usize, src: &str) -> Result<Self> {
        let comps = src
            .split(';')
            .map(|s| Expr::parse(s.trim()))
            .collect::<Result<Vec<_>>>()?;
        Self::vector(dim, comps)
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }
}

impl Field for PiecewiseField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn outputs(&self) -> usize {
        self.components.len()
    }

    fn eval_into(&self, p: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.components) {
            *o = e.eval(p);
        }
    }

    fn jacobian_into(&self, p: &[f64], val: &mut [f64], jac: &mut [f64]) -> bool {
        let n = self.dim;
        let mut smooth = true;
        for (i, e) in self.components.iter().enumerate() {
            let j = e.jet(p);
            val[i] = j.value;
            jac[i * n..(i + 1) * n].copy_from_slice(&j.grad[..n]);
            smooth &= j.smooth;
        }
        smooth
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz
    }
}

type ValueFn<'a> = dyn Fn(&[f64], &mut [f64]) + Send + Sync + 'a;
type JacFn<'a> = dyn Fn(&[f64], &mut [f64], &mut [f64]) -> bool + Send + Sync + 'a;

/// Field backed by closures; used for derived fields and ad-hoc constructions.
pub struct FnField<'a> {
    dim: usize,
    outputs: usize,
    value: Box<ValueFn<'a>>,
    jac: Option<Box<JacFn<'a>>>,
    lipschitz: Option<f64>,
}

impl<'a> FnField<'a> {
    /// Value-only field; it has no smooth points.
    pub fn new(
        dim: usize,
        outputs: usize,
        value: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'a,
    ) -> Self {
        FnField {
            dim,
            outputs,
            value: Box::new(value),
            jac: None,
            lipschitz: None,
        }
    }

    pub fn scalar(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'a) -> Self {
        Self::new(dim, 1, move |p, out| out[0] = f(p))
    }

    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&[f64], &mut [f64], &mut [f64]) -> bool + Send + Sync + 'a,
    ) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }
}

impl Field for FnField<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn outputs(&self) -> usize {
        self.outputs
    }

    fn eval_into(&self, p: &[f64], out: &mut [f64]) {
        (self.value)(p, out)
    }

    fn jacobian_into(&self, p: &[f64], val: &mut [f64], jac: &mut [f64]) -> bool {
        match &self.jac {
            Some(j) => j(p, val, jac),
            None => {
                (self.value)(p, val);
                false
            }
        }
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz
    }
}

const BUF: usize = MAX_DIM * MAX_DIM;

/// `y ↦ F(y) · v`.
pub fn dot<'a>(f: &'a dyn Field, v: Vec<f64>) -> FnField<'a> {
    let n = f.dim();
    let m = f.outputs();
    let v2 = v.clone();
    FnField::new(n, 1, move |p, out| {
        let mut val = [0.0; MAX_DIM];
        f.eval_into(p, &mut val[..m]);
        out[0] = val[..m].iter().zip(&v).map(|(a, b)| a * b).sum();
    })
    .with_jacobian(move |p, out, jac| {
        let mut val = [0.0; MAX_DIM];
        let mut j = [0.0; BUF];
        let ok = f.jacobian_into(p, &mut val[..m], &mut j[..m * n]);
        out[0] = val[..m].iter().zip(&v2).map(|(a, b)| a * b).sum();
        for c in 0..n {
            jac[c] = (0..m).map(|r| v2[r] * j[r * n + c]).sum();
        }
        ok
    })
}

/// `y ↦ ca F(y) + cb G(y)`.
pub fn linear_combination<'a>(
    ca: f64,
    a: &'a dyn Field,
    cb: f64,
    b: &'a dyn Field,
) -> Result<FnField<'a>> {
    if a.dim() != b.dim() || a.outputs() != b.outputs() {
        return Err(Error::invalid("operands of a sum must have equal shapes"));
    }
    let n = a.dim();
    let m = a.outputs();
    let lip = a
        .lipschitz_hint()
        .zip(b.lipschitz_hint())
        .map(|(la, lb)| ca.abs() * la + cb.abs() * lb);
    let mut field = FnField::new(n, m, move |p, out| {
        let mut va = [0.0; MAX_DIM];
        let mut vb = [0.0; MAX_DIM];
        a.eval_into(p, &mut va[..m]);
        b.eval_into(p, &mut vb[..m]);
        for i in 0..m {
            out[i] = ca * va[i] + cb * vb[i];
        }
    })
    .with_jacobian(move |p, out, jac| {
        let (mut va, mut vb) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        let (mut ja, mut jb) = ([0.0; BUF], [0.0; BUF]);
        let oa = a.jacobian_into(p, &mut va[..m], &mut ja[..m * n]);
        let ob = b.jacobian_into(p, &mut vb[..m], &mut jb[..m * n]);
        for i in 0..m {
            out[i] = ca * va[i] + cb * vb[i];
        }
        for i in 0..m * n {
            jac[i] = ca * ja[i] + cb * jb[i];
        }
        oa && ob
    });
    field.lipschitz = lip;
    Ok(field)
}

/// `y ↦ s F(y)`.
pub fn scale(s: f64, f: &dyn Field) -> FnField<'_> {
    let n = f.dim();
    let m = f.outputs();
    let mut field = FnField::new(n, m, move |p, out| {
        f.eval_into(p, out);
        out.iter_mut().for_each(|v| *v *= s);
    })
    .with_jacobian(move |p, out, jac| {
        let ok = f.jacobian_into(p, out, jac);
        out.iter_mut().for_each(|v| *v *= s);
        jac.iter_mut().for_each(|v| *v *= s);
        ok
    });
    field.lipschitz = f.lipschitz_hint().map(|l| s.abs() * l);
    field
}

/// `y ↦ F(y) · G(y)` (the scalar product of two `m`-vectors).
pub fn product<'a>(a: &'a dyn Field, b: &'a dyn Field) -> Result<FnField<'a>> {
    if a.dim() != b.dim() || a.outputs() != b.outputs() {
        return Err(Error::invalid("operands of a product must have equal shapes"));
    }
    let n = a.dim();
    let m = a.outputs();
    Ok(FnField::new(n, 1, move |p, out| {
        let (mut va, mut vb) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        a.eval_into(p, &mut va[..m]);
        b.eval_into(p, &mut vb[..m]);
        out[0] = (0..m).map(|i| va[i] * vb[i]).sum();
    })
    .with_jacobian(move |p, out, jac| {
        let (mut va, mut vb) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        let (mut ja, mut jb) = ([0.0; BUF], [0.0; BUF]);
        let oa = a.jacobian_into(p, &mut va[..m], &mut ja[..m * n]);
        let ob = b.jacobian_into(p, &mut vb[..m], &mut jb[..m * n]);
        out[0] = (0..m).map(|i| va[i] * vb[i]).sum();
        for c in 0..n {
            jac[c] = (0..m)
                .map(|i| va[i] * jb[i * n + c] + vb[i] * ja[i * n + c])
                .sum();
        }
        oa && ob
    }))
}

/// `y ↦ F(y) / g(y)` for a scalar `g`.
pub fn quotient<'a>(f: &'a dyn Field, g: &'a dyn Field) -> Result<FnField<'a>> {
    if f.dim() != g.dim() || g.outputs() != 1 {
        return Err(Error::invalid("quotient needs a scalar denominator on the same space"));
    }
    let n = f.dim();
    let m = f.outputs();
    Ok(FnField::new(n, m, move |p, out| {
        f.eval_into(p, out);
        let d = g.value(p);
        out.iter_mut().for_each(|v| *v /= d);
    })
    .with_jacobian(move |p, out, jac| {
        let mut jf = [0.0; BUF];
        let (mut vg, mut jg) = ([0.0; 1], [0.0; MAX_DIM]);
        let of = f.jacobian_into(p, out, &mut jf[..m * n]);
        let og = g.jacobian_into(p, &mut vg, &mut jg[..n]);
        let d = vg[0];
        for i in 0..m {
            for c in 0..n {
                jac[i * n + c] = (d * jf[i * n + c] - out[i] * jg[c]) / (d * d);
            }
            out[i] /= d;
        }
        of && og && d != 0.0
    }))
}

/// `y ↦ G(H(y))`.
pub fn compose<'a>(g: &'a dyn Field, h: &'a dyn Field) -> Result<FnField<'a>> {
    if g.dim() != h.outputs() {
        return Err(Error::invalid("composition shapes do not match"));
    }
    let n = h.dim();
    let k = h.outputs();
    let m = g.outputs();
    let mut field = FnField::new(n, m, move |p, out| {
        let mut vh = [0.0; MAX_DIM];
        h.eval_into(p, &mut vh[..k]);
        g.eval_into(&vh[..k], out);
    })
    .with_jacobian(move |p, out, jac| {
        let (mut vh, mut jh, mut jg) = ([0.0; MAX_DIM], [0.0; BUF], [0.0; BUF]);
        let oh = h.jacobian_into(p, &mut vh[..k], &mut jh[..k * n]);
        let og = g.jacobian_into(&vh[..k], out, &mut jg[..m * k]);
        for i in 0..m {
            for c in 0..n {
                jac[i * n + c] = (0..k).map(|l| jg[i * k + l] * jh[l * n + c]).sum();
            }
        }
        oh && og
    });
    field.lipschitz = g.lipschitz_hint().zip(h.lipschitz_hint()).map(|(a, b)| a * b);
    Ok(field)
}

/// `y ↦ DF(y) : V` at smooth points, NaN elsewhere.
pub fn jacobian_pairing(f: &dyn Field, v: Vec<f64>) -> FnField<'_> {
    let n = f.dim();
    let m = f.outputs();
    FnField::new(n, 1, move |p, out| {
        let (mut val, mut jac) = ([0.0; MAX_DIM], [0.0; BUF]);
        out[0] = if f.jacobian_into(p, &mut val[..m], &mut jac[..m * n]) {
            jac[..m * n].iter().zip(&v).map(|(a, b)| a * b).sum()
        } else {
            f64::NAN
        };
    })
}

/// Norm `|F(y) - α|` (Euclidean over components).
pub fn deviation(f: &dyn Field, alpha: Vec<f64>) -> FnField<'_> {
    let m = f.outputs();
    FnField::new(f.dim(), 1, move |p, out| {
        let mut val = [0.0; MAX_DIM];
        f.eval_into(p, &mut val[..m]);
        out[0] = val[..m]
            .iter()
            .zip(&alpha)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    })
}

/// Single component of a vector field.
pub fn component(f: &dyn Field, i: usize) -> FnField<'_> {
    let n = f.dim();
    let m = f.outputs();
    FnField::new(n, 1, move |p, out| {
        let mut val = [0.0; MAX_DIM];
        f.eval_into(p, &mut val[..m]);
        out[0] = val[i];
    })
    .with_jacobian(move |p, out, jac| {
        let (mut val, mut j) = ([0.0; MAX_DIM], [0.0; BUF]);
        let ok = f.jacobian_into(p, &mut val[..m], &mut j[..m * n]);
        out[0] = val[i];
        jac[..n].copy_from_slice(&j[i * n..(i + 1) * n]);
        ok
    })
}
