//! One-dimensional neural-ODE normalizing flow. The vector field is a
//! 1→4→4→1 swish MLP (33 parameters); the flow integrates it over a fixed
//! horizon with classical fixed-step RK4. The log-derivative rides along as
//! a second state via the sensitivity equation d(log J)/dξ = ∂N/∂g, and
//! parameter gradients come from reverse-mode differentiation through the
//! unrolled solver, so they are exact for the discrete map.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::PointGrad;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::special::sigmoid;

pub const MLP_PARAM_COUNT: usize = 33;

/// Integration aborts once the state magnitude passes this.
const DIVERGENCE_BOUND: f64 = 1e8;

fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

fn swish_d(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

/// Weights of the two-hidden-layer MLP vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: [f64; 4],
    pub b1: [f64; 4],
    pub w2: [[f64; 4]; 4],
    pub b2: [f64; 4],
    pub w3: [f64; 4],
    pub b3: f64,
}

impl MlpParams {
    pub fn zeros() -> Self {
        MlpParams {
            w1: [0.0; 4],
            b1: [0.0; 4],
            w2: [[0.0; 4]; 4],
            b2: [0.0; 4],
            w3: [0.0; 4],
            b3: 0.0,
        }
    }

    /// Gaussian init with scale 0.1, except b3 = 0, so the initial flow is
    /// close to the identity.
    pub fn init(rng: &mut Rng) -> Self {
        let mut p = MlpParams::zeros();
        let mut v = p.to_vec();
        for w in v.iter_mut().take(MLP_PARAM_COUNT - 1) {
            *w = 0.1 * rng.normal();
        }
        v[MLP_PARAM_COUNT - 1] = 0.0;
        p = MlpParams::from_slice(&v);
        p
    }

    /// Canonical flat order: w1, b1, w2 (row-major), b2, w3, b3.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(MLP_PARAM_COUNT);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        for row in &self.w2 {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.b2);
        v.extend_from_slice(&self.w3);
        v.push(self.b3);
        v
    }

    pub fn from_slice(p: &[f64]) -> Self {
        assert_eq!(p.len(), MLP_PARAM_COUNT);
        let mut m = MlpParams::zeros();
        m.w1.copy_from_slice(&p[0..4]);
        m.b1.copy_from_slice(&p[4..8]);
        for (i, row) in m.w2.iter_mut().enumerate() {
            row.copy_from_slice(&p[8 + 4 * i..12 + 4 * i]);
        }
        m.b2.copy_from_slice(&p[24..28]);
        m.w3.copy_from_slice(&p[28..32]);
        m.b3 = p[32];
        m
    }

    /// Field value N(state, ξ). With time conditioning off the field is
    /// autonomous; on, ξ is added to every first-layer pre-activation.
    pub fn eval(&self, state: f64, xi: f64, time_conditioning: bool) -> f64 {
        self.eval_with_gderiv(state, xi, time_conditioning).0
    }

    /// (N, ∂N/∂state), sharing the hidden activations.
    pub fn eval_with_gderiv(&self, state: f64, xi: f64, time_conditioning: bool) -> (f64, f64) {
        let mut h1 = [0.0f64; 4];
        let mut dh1 = [0.0f64; 4];
        for j in 0..4 {
            let mut a = self.w1[j] * state + self.b1[j];
            if time_conditioning {
                a += xi;
            }
            h1[j] = swish(a);
            dh1[j] = swish_d(a) * self.w1[j];
        }
        let mut out = self.b3;
        let mut dout = 0.0;
        for i in 0..4 {
            let mut a = self.b2[i];
            let mut da = 0.0;
            for j in 0..4 {
                a += self.w2[i][j] * h1[j];
                da += self.w2[i][j] * dh1[j];
            }
            let h2 = swish(a);
            let dh2 = swish_d(a) * da;
            out += self.w3[i] * h2;
            dout += self.w3[i] * dh2;
        }
        (out, dout)
    }
}

/// Horizon and discretization of the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeConfig {
    pub tau: f64,
    pub steps: usize,
    pub time_conditioning: bool,
}

impl NodeConfig {
    pub fn new(tau: f64, steps: usize) -> Self {
        assert!(tau > 0.0, "tau must be positive");
        assert!(steps >= 1, "steps must be at least 1");
        NodeConfig { tau, steps, time_conditioning: false }
    }

    pub fn with_conditioning(mut self) -> Self {
        self.time_conditioning = true;
        self
    }

    /// 32 steps cover short horizons; long horizons get 128.
    pub fn default_steps(tau: f64) -> usize {
        if tau <= 1.0 {
            32
        } else {
            128
        }
    }

    pub fn for_tau(tau: f64) -> Self {
        Self::new(tau, Self::default_steps(tau))
    }
}

/// The flow itself: parameters plus integration config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NodeJson", from = "NodeJson")]
pub struct NodeTransform {
    pub mlp: MlpParams,
    pub cfg: NodeConfig,
}

#[derive(Serialize, Deserialize, Clone)]
struct NodeJson {
    tau: f64,
    steps: usize,
    #[serde(default, skip_serializing_if = "is_false")]
    time_conditioning: bool,
    #[serde(rename = "W1")]
    w1: [f64; 4],
    b1: [f64; 4],
    #[serde(rename = "W2")]
    w2: [[f64; 4]; 4],
    b2: [f64; 4],
    #[serde(rename = "W3")]
    w3: [f64; 4],
    b3: f64,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl From<NodeTransform> for NodeJson {
    fn from(n: NodeTransform) -> Self {
        NodeJson {
            tau: n.cfg.tau,
            steps: n.cfg.steps,
            time_conditioning: n.cfg.time_conditioning,
            w1: n.mlp.w1,
            b1: n.mlp.b1,
            w2: n.mlp.w2,
            b2: n.mlp.b2,
            w3: n.mlp.w3,
            b3: n.mlp.b3,
        }
    }
}

impl From<NodeJson> for NodeTransform {
    fn from(j: NodeJson) -> Self {
        NodeTransform {
            mlp: MlpParams { w1: j.w1, b1: j.b1, w2: j.w2, b2: j.b2, w3: j.w3, b3: j.b3 },
            cfg: NodeConfig {
                tau: j.tau,
                steps: j.steps,
                time_conditioning: j.time_conditioning,
            },
        }
    }
}

thread_local! {
    // tape + adjoint buffer reused across points on each worker thread
    static SCRATCH: RefCell<(Tape, Vec<[f64; 2]>)> =
        RefCell::new((Tape::new(), Vec::new()));
}

impl NodeTransform {
    pub fn new(mlp: MlpParams, cfg: NodeConfig) -> Self {
        NodeTransform { mlp, cfg }
    }

    pub fn near_identity_init(cfg: NodeConfig, rng: &mut Rng) -> Self {
        NodeTransform { mlp: MlpParams::init(rng), cfg }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfg.tau > 0.0) || !self.cfg.tau.is_finite() {
            return Err(Error::Input("node tau must be positive and finite".into()));
        }
        if self.cfg.steps == 0 {
            return Err(Error::Input("node steps must be at least 1".into()));
        }
        if self.mlp.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("node parameters must be finite".into()));
        }
        Ok(())
    }

    fn diverged(&self, g: f64, x: f64) -> Error {
        Error::Divergence(format!(
            "flow state exploded integrating from x = {x} (|state| = {:.3e} > {DIVERGENCE_BOUND:e})",
            g.abs()
        ))
    }

    /// Integrate the field from ξ = 0 to τ.
    pub fn forward(&self, x: f64) -> Result<f64> {
        self.forward_with_log_deriv(x).map(|(z, _)| z)
    }

    /// Integrate state and log-Jacobian together on the same RK4 grid.
    pub fn forward_with_log_deriv(&self, x: f64) -> Result<(f64, f64)> {
        let cond = self.cfg.time_conditioning;
        let h = self.cfg.tau / self.cfg.steps as f64;
        let mut g = x;
        let mut lj = 0.0;
        for n in 0..self.cfg.steps {
            let xi = n as f64 * h;
            let (k1, l1) = self.mlp.eval_with_gderiv(g, xi, cond);
            let (k2, l2) = self.mlp.eval_with_gderiv(g + 0.5 * h * k1, xi + 0.5 * h, cond);
            let (k3, l3) = self.mlp.eval_with_gderiv(g + 0.5 * h * k2, xi + 0.5 * h, cond);
            let (k4, l4) = self.mlp.eval_with_gderiv(g + h * k3, xi + h, cond);
            g += h / 6.0 * (((k1 + 2.0 * k2) + 2.0 * k3) + k4);
            lj += h / 6.0 * (((l1 + 2.0 * l2) + 2.0 * l3) + l4);
            if !g.is_finite() || g.abs() > DIVERGENCE_BOUND {
                return Err(self.diverged(g, x));
            }
        }
        Ok((g, lj))
    }

    /// Integrate backward from ξ = τ to 0, then polish with Newton steps on
    /// the forward map so round trips hold well below the 1e-6 contract.
    pub fn inverse(&self, z: f64) -> Result<f64> {
        let cond = self.cfg.time_conditioning;
        let h = self.cfg.tau / self.cfg.steps as f64;
        let mut g = z;
        for n in 0..self.cfg.steps {
            let xi = self.cfg.tau - n as f64 * h;
            let k1 = self.mlp.eval(g, xi, cond);
            let k2 = self.mlp.eval(g - 0.5 * h * k1, xi - 0.5 * h, cond);
            let k3 = self.mlp.eval(g - 0.5 * h * k2, xi - 0.5 * h, cond);
            let k4 = self.mlp.eval(g - h * k3, xi - h, cond);
            g -= h / 6.0 * (((k1 + 2.0 * k2) + 2.0 * k3) + k4);
            if !g.is_finite() || g.abs() > DIVERGENCE_BOUND {
                return Err(self.diverged(g, z));
            }
        }
        for _ in 0..3 {
            let (fz, lj) = self.forward_with_log_deriv(g)?;
            let err = fz - z;
            if err.abs() <= 1e-13 * z.abs().max(1.0) {
                break;
            }
            g -= err / lj.exp();
            if !g.is_finite() {
                return Err(self.diverged(g, z));
            }
        }
        Ok(g)
    }

    /// log f'(x) from the sensitivity equation.
    pub fn log_deriv(&self, x: f64) -> Result<f64> {
        self.forward_with_log_deriv(x).map(|(_, lj)| lj)
    }

    /// Values plus exact parameter gradients of z and log f'(x), by one
    /// taped pass through the unrolled solver and one dual adjoint sweep.
    pub fn point_grad(&self, x: f64) -> Result<PointGrad> {
        SCRATCH.with(|cell| {
            let (tape, adj) = &mut *cell.borrow_mut();
            tape.clear();
            let cond = self.cfg.time_conditioning;
            let steps = self.cfg.steps;
            let h = self.cfg.tau / steps as f64;

            // leaves in canonical order
            let flat = self.mlp.to_vec();
            let mut leaf_vars = Vec::with_capacity(MLP_PARAM_COUNT);
            for &p in &flat {
                leaf_vars.push(tape.leaf(p));
            }
            let lv = LeafSet::from_slice(&leaf_vars);

            let mut g = tape.leaf(x);
            let mut lj = tape.leaf(0.0);
            for n in 0..steps {
                let xi = n as f64 * h;
                let (k1, l1) = mlp_tape(tape, &lv, g, xi, cond);
                let g2 = stage_input(tape, g, k1, 0.5 * h);
                let (k2, l2) = mlp_tape(tape, &lv, g2, xi + 0.5 * h, cond);
                let g3 = stage_input(tape, g, k2, 0.5 * h);
                let (k3, l3) = mlp_tape(tape, &lv, g3, xi + 0.5 * h, cond);
                let g4 = stage_input(tape, g, k3, h);
                let (k4, l4) = mlp_tape(tape, &lv, g4, xi + h, cond);
                g = rk4_update(tape, g, k1, k2, k3, k4, h);
                lj = rk4_update(tape, lj, l1, l2, l3, l4, h);
                if !g.val.is_finite() || g.val.abs() > DIVERGENCE_BOUND {
                    return Err(self.diverged(g.val, x));
                }
            }

            tape.gradient_pair_into(g, lj, adj);
            let mut d_z = Vec::with_capacity(MLP_PARAM_COUNT);
            let mut d_log_deriv = Vec::with_capacity(MLP_PARAM_COUNT);
            for v in &leaf_vars {
                let a = Tape::adjoint_pair_of(adj, *v);
                d_z.push(a[0]);
                d_log_deriv.push(a[1]);
            }
            Ok(PointGrad { z: g.val, log_deriv: lj.val, d_z, d_log_deriv })
        })
    }
}

struct LeafSet {
    w1: [Var; 4],
    b1: [Var; 4],
    w2: [[Var; 4]; 4],
    b2: [Var; 4],
    w3: [Var; 4],
    b3: Var,
}

impl LeafSet {
    fn from_slice(v: &[Var]) -> Self {
        let mut w2 = [[v[0]; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                w2[i][j] = v[8 + 4 * i + j];
            }
        }
        LeafSet {
            w1: [v[0], v[1], v[2], v[3]],
            b1: [v[4], v[5], v[6], v[7]],
            w2,
            b2: [v[24], v[25], v[26], v[27]],
            w3: [v[28], v[29], v[30], v[31]],
            b3: v[32],
        }
    }
}

fn stage_input(t: &mut Tape, g: Var, k: Var, scale: f64) -> Var {
    let s = t.mul_const(k, scale);
    t.add(g, s)
}

fn rk4_update(t: &mut Tape, state: Var, k1: Var, k2: Var, k3: Var, k4: Var, h: f64) -> Var {
    let k2x2 = t.mul_const(k2, 2.0);
    let k3x2 = t.mul_const(k3, 2.0);
    let mut s = t.add(k1, k2x2);
    s = t.add(s, k3x2);
    s = t.add(s, k4);
    let incr = t.mul_const(s, h / 6.0);
    t.add(state, incr)
}

/// Field value and its state-derivative as tape variables, mirroring
/// `MlpParams::eval_with_gderiv` operation for operation.
fn mlp_tape(t: &mut Tape, lv: &LeafSet, g: Var, xi: f64, cond: bool) -> (Var, Var) {
    let mut h1 = [g; 4];
    let mut dh1 = [g; 4];
    for j in 0..4 {
        let mut a = t.mul(lv.w1[j], g);
        a = t.add(a, lv.b1[j]);
        if cond {
            a = t.add_const(a, xi);
        }
        h1[j] = t.swish(a);
        let sd = t.swish_deriv(a);
        dh1[j] = t.mul(sd, lv.w1[j]);
    }
    let mut out = lv.b3;
    let mut dout: Option<Var> = None;
    for i in 0..4 {
        let mut a = lv.b2[i];
        let mut da: Option<Var> = None;
        for j in 0..4 {
            let m = t.mul(lv.w2[i][j], h1[j]);
            a = t.add(a, m);
            let dm = t.mul(lv.w2[i][j], dh1[j]);
            da = Some(match da {
                None => dm,
                Some(d) => t.add(d, dm),
            });
        }
        let h2 = t.swish(a);
        let sd = t.swish_deriv(a);
        let dh2 = t.mul(sd, da.expect("4 hidden units"));
        let m = t.mul(lv.w3[i], h2);
        out = t.add(out, m);
        let dm = t.mul(lv.w3[i], dh2);
        dout = Some(match dout {
            None => dm,
            Some(d) => t.add(d, dm),
        });
    }
    (out, dout.expect("4 hidden units"))
}
