use anisowave::coorbit::{
    control_weight, envelope_integrability, lambda_sensitivity, molecule_param_check, weight_v_brute, weight_v_closed, Envelope,
    VSampler,
};
use anisowave::group::GroupElement;
use anisowave::norms::TLParams;
use anisowave::{Error, Result};
use clap::Subcommand;
use serde_json::json;

use crate::input;
use crate::Outcome;

#[derive(Debug, Subcommand)]
pub enum WeightOp {
    /// v(y, t) in closed form and by brute-force supremum.
    Eval {
        #[arg(long)]
        matrix: String,
        /// Spatial part y, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Scale part t.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        s: f64,
    },
    /// σ, κ and the branch of the standard control weight, evaluated at (x, s).
    Control {
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value = "p=2,q=2,alpha=0,beta=1.1")]
        params: String,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        s: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum MoleculeOp {
    /// Both vector conditions; exits 1 when either fails.
    Check {
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value = "p=2,q=2,alpha=0,beta=1.1")]
        params: String,
        #[arg(long = "L")]
        l: f64,
        #[arg(long = "N")]
        n: u32,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// λ₋; defaults to 1 + 0.9(min|σ(A)| − 1).
        #[arg(long)]
        lambda_minus: Option<f64>,
        /// Also report pass/fail for this many λ₋ across (1, min|σ(A)|).
        #[arg(long, default_value_t = 0)]
        sensitivity: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum EnvelopeOp {
    /// Finiteness of ‖Ξ_{σ,L}‖_{L^r} with numeric certificates.
    Integrable {
        #[arg(long)]
        matrix: String,
        /// σ₁,σ₂.
        #[arg(long)]
        sigma: String,
        #[arg(long = "L", allow_hyphen_values = true)]
        l: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
    },
}

fn element(x: &str, s: f64, d: usize) -> Result<GroupElement> {
    let x = input::vector(x)?;
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(GroupElement::new(x, s))
}

pub fn weight(op: WeightOp) -> Result<Outcome> {
    match op {
        WeightOp::Eval { matrix, x, s } => {
            let dil = input::dilation(&matrix)?;
            let g = element(&x, s, dil.dim())?;
            let brute = weight_v_brute(&g, &VSampler::new(&dil)?, &dil)?;
            input::emit(&json!({ "x": g.x, "s": g.s, "closed": weight_v_closed(&g, &dil)?, "brute": brute }))?;
        }
        WeightOp::Control { matrix, params, x, s } => {
            let dil = input::dilation(&matrix)?;
            let spec = control_weight(&TLParams::parse(&params)?, dil.abs_det())?;
            let g = match x {
                Some(x) => element(&x, s, dil.dim())?,
                None => GroupElement::new(vec![0.0; dil.dim()], s),
            };
            input::emit(&json!({
                "spec": spec,
                "at": { "x": g.x, "s": g.s },
                "value": spec.eval(&g, &dil)?,
                "symmetryResidual": spec.symmetry_residual(&g, &dil)?,
            }))?;
        }
    }
    Ok(Outcome::Pass)
}

pub fn molecule(op: MoleculeOp) -> Result<Outcome> {
    let MoleculeOp::Check { matrix, params, l, n, delta, lambda_minus, sensitivity } = op;
    let dil = input::dilation(&matrix)?;
    let params = TLParams::parse(&params)?;
    let lam = lambda_minus.unwrap_or(1.0 + 0.9 * (dil.matrix().min_modulus() - 1.0));
    let check = molecule_param_check(&params, l, n, delta, lam, dil.abs_det())?;
    let sweep: Vec<_> = lambda_sensitivity(&params, l, n, delta, &dil, sensitivity)?
        .into_iter()
        .map(|(lam, c)| json!({ "lambdaMinus": lam, "pass": c.pass }))
        .collect();
    input::emit(&json!({ "params": params, "L": l, "N": n, "delta": delta, "lambdaMinus": lam, "check": check, "sensitivity": sweep }))?;
    Ok(Outcome::from_pass(check.pass))
}

pub fn envelope(op: EnvelopeOp) -> Result<Outcome> {
    let EnvelopeOp::Integrable { matrix, sigma, l, r } = op;
    let dil = input::dilation(&matrix)?;
    let s = input::vector(&sigma)?;
    let [s1, s2] = s[..] else {
        return Err(Error::Parse(format!("sigma needs two values, got '{sigma}'")));
    };
    let env = Envelope::new((s1, s2), l)?;
    input::emit(&envelope_integrability(&env, r, dil.abs_det())?)?;
    Ok(Outcome::Pass)
}
