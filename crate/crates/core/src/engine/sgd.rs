use super::model::{fill_latent_neighbors, neighbor_offset, raw_score, Scratch};
use super::neighborhood::Neighborhood;
use super::params::{FactorBlock, ModelParams};
use super::{Hyperparams, Variant};
use crate::{Error, Result};

/// One stochastic gradient step on a single (possibly artificial) rating.
///
/// All gradients are taken at the pre-step parameters, so the step equals
/// `-lr * grad` of `0.5 * (r - r_hat)^2 + 0.5 * lambda * |theta|^2` for every
/// block it touches. Returns the prediction error `r - r_hat`.
#[allow(clippy::too_many_arguments)]
pub fn sgd_step(
    params: &mut ModelParams,
    variant: Variant,
    hyper: &Hyperparams,
    hood: &Neighborhood<'_>,
    u: u32,
    i: u32,
    target: f64,
    is_artificial: bool,
) -> Result<f64> {
    if u as usize >= params.n_users() || i as usize >= params.n_items() {
        return Err(Error::Argument(format!("(user {u}, item {i}) outside the model")));
    }
    let mut scratch = Scratch::default();
    step(params, variant, hyper, hood, u, i, target, is_artificial, None, &mut scratch)
}

/// Model-form score used inside training: unclamped, and with both blocks
/// of the dual-parameter variant.
pub fn training_score(
    params: &ModelParams,
    variant: Variant,
    hyper: &Hyperparams,
    hood: &Neighborhood<'_>,
    u: u32,
    i: u32,
) -> f64 {
    raw_score(params, variant, hyper, hood, u, i, true, &mut Scratch::default())
}

/// Learning rate for a sample: artificial ratings use `gamma_art` in the
/// variants that mix both kinds into one stream.
fn rate(variant: Variant, hyper: &Hyperparams, is_artificial: bool) -> f64 {
    match variant {
        Variant::StepSize | Variant::DualParams if is_artificial => hyper.gamma_art,
        _ => hyper.gamma,
    }
}

fn update_block(
    block: &mut FactorBlock,
    u: usize,
    i: usize,
    err: f64,
    lr: f64,
    lambda: f64,
    name: &'static str,
) -> Result<()> {
    let bu = block.user_bias[u];
    let bi = block.item_bias[i];
    block.user_bias[u] = bu + lr * (err - lambda * bu);
    block.item_bias[i] = bi + lr * (err - lambda * bi);
    let p = block.user_factors.row_mut(u);
    let q = block.item_factors.row_mut(i);
    let mut finite = block.user_bias[u].is_finite() && block.item_bias[i].is_finite();
    for (pf, qf) in p.iter_mut().zip(q.iter_mut()) {
        let (po, qo) = (*pf, *qf);
        *pf = po + lr * (err * qo - lambda * po);
        *qf = qo + lr * (err * po - lambda * qo);
        finite &= pf.is_finite() && qf.is_finite();
    }
    if finite {
        Ok(())
    } else {
        Err(Error::Divergence { block: name })
    }
}

fn check(v: f64, block: &'static str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { block })
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn step(
    params: &mut ModelParams,
    variant: Variant,
    hyper: &Hyperparams,
    hood: &Neighborhood<'_>,
    u: u32,
    i: u32,
    target: f64,
    is_artificial: bool,
    cached_assist: Option<f64>,
    scratch: &mut Scratch,
) -> Result<f64> {
    let (ui, ii) = (u as usize, i as usize);
    let lambda = hyper.lambda;
    let lr = rate(variant, hyper, is_artificial);
    match variant {
        Variant::Baseline | Variant::StepSize | Variant::Mixture => {
            let err = target - (params.mu + params.base.score(ui, ii));
            update_block(&mut params.base, ui, ii, err, lr, lambda, "base block")?;
            Ok(err)
        }
        Variant::DualParams => {
            let shadow = params
                .shadow
                .as_mut()
                .ok_or_else(|| Error::Argument("dual-parameter model without shadow block".into()))?;
            let err = target - (params.mu + params.base.score(ui, ii) + shadow.score(ui, ii));
            if is_artificial {
                update_block(shadow, ui, ii, err, lr, lambda, "shadow block")?;
            } else {
                update_block(&mut params.base, ui, ii, err, lr, lambda, "base block")?;
            }
            Ok(err)
        }
        Variant::ItemAssist | Variant::UserItemAssist => {
            let s = cached_assist.unwrap_or_else(|| hood.assist(u, i, neighbor_offset(params, hyper)));
            let y = if variant == Variant::ItemAssist {
                params.item_assist.as_ref().map_or(0.0, |y| y[ii])
            } else {
                params.pair_assist_value(u, i)
            };
            let err = target - (params.mu + params.base.score(ui, ii) + y * s);
            update_block(&mut params.base, ui, ii, err, lr, lambda, "base block")?;
            let y_new = y + lr * (err * s - lambda * y);
            if variant == Variant::ItemAssist {
                check(y_new, "y_i")?;
                params
                    .item_assist
                    .as_mut()
                    .ok_or_else(|| Error::Argument("item-assist model without y_i block".into()))?[ii] = y_new;
            } else {
                check(y_new, "y_ui")?;
                params
                    .pair_assist
                    .as_mut()
                    .ok_or_else(|| Error::Argument("user-item-assist model without y_ui block".into()))?
                    .insert((u, i), y_new);
            }
            Ok(err)
        }
        Variant::SimLatent => {
            if params.neighbor_factors.is_none() {
                return Err(Error::Argument("similarity-latent model without y_j block".into()));
            }
            fill_latent_neighbors(params, hyper, hood, u, i, scratch);
            let off = neighbor_offset(params, hyper);
            let base = &mut params.base;
            let pred = params.mu
                + (base.user_bias[ui]
                    + base.item_bias[ii]
                    + super::params::dot(base.user_factors.row(ui), &scratch.qz));
            let err = target - pred;

            let bu = base.user_bias[ui];
            let bi = base.item_bias[ii];
            base.user_bias[ui] = bu + lr * (err - lambda * bu);
            base.item_bias[ii] = bi + lr * (err - lambda * bi);
            check(base.user_bias[ui] + base.item_bias[ii], "biases")?;

            let p_old: Vec<f64> = base.user_factors.row(ui).to_vec();
            {
                let q = base.item_factors.row_mut(ii);
                for (qf, &pf) in q.iter_mut().zip(&p_old) {
                    *qf += lr * (err * pf - lambda * *qf);
                }
                if q.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Divergence { block: "q_i" });
                }
            }
            {
                let p = base.user_factors.row_mut(ui);
                for ((pf, &po), &qz) in p.iter_mut().zip(&p_old).zip(&scratch.qz) {
                    *pf = po + lr * (err * qz - lambda * po);
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Divergence { block: "p_u" });
                }
            }
            if scratch.total_sim > 0.0 {
                let y = params.neighbor_factors.as_mut().expect("checked above");
                for t in &scratch.terms {
                    let c = t.sim * (t.rating - off) / scratch.total_sim;
                    let row = y.row_mut(t.item as usize);
                    for (yf, &pf) in row.iter_mut().zip(&p_old) {
                        *yf += lr * (err * c * pf - lambda * *yf);
                    }
                    if row.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Divergence { block: "y_j" });
                    }
                }
            }
            Ok(err)
        }
    }
}
