//! Seeded random expression generation for property tests and numerical
//! hygiene checks.

use super::{Expr, Func};
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct RandomExprConfig {
    pub dimension: usize,
    pub max_depth: usize,
    /// Restrict to `+ - *`, small integer constants and small integer powers.
    pub polynomial: bool,
}

impl RandomExprConfig {
    pub fn polynomial(dimension: usize, max_depth: usize) -> Self {
        RandomExprConfig {
            dimension,
            max_depth,
            polynomial: true,
        }
    }

    pub fn general(dimension: usize, max_depth: usize) -> Self {
        RandomExprConfig {
            dimension,
            max_depth,
            polynomial: false,
        }
    }
}

fn leaf(rng: &mut impl Rng, cfg: &RandomExprConfig) -> Expr {
    let n = cfg.dimension.max(1);
    match rng.random_range(0..5) {
        0 => Expr::Const(rng.random_range(-3..=3) as f64),
        1 | 2 => Expr::q(rng.random_range(1..=n)),
        _ => Expr::p(rng.random_range(1..=n)),
    }
}

/// Random expression. In general mode, functions with restricted domains
/// are applied to strictly positive arguments (`ln(x^2 + 1)`,
/// `x / (y^2 + 1)`), so results are defined everywhere.
pub fn random_expr(rng: &mut impl Rng, cfg: &RandomExprConfig) -> Expr {
    build(rng, cfg, cfg.max_depth)
}

fn build(rng: &mut impl Rng, cfg: &RandomExprConfig, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return leaf(rng, cfg);
    }
    let choices = if cfg.polynomial { 4 } else { 7 };
    match rng.random_range(0..choices) {
        0 => build(rng, cfg, depth - 1) + build(rng, cfg, depth - 1),
        1 => build(rng, cfg, depth - 1) - build(rng, cfg, depth - 1),
        2 => build(rng, cfg, depth - 1) * build(rng, cfg, depth - 1),
        3 => build(rng, cfg, depth - 1).powi(rng.random_range(2..=3)),
        4 => {
            let positive = build(rng, cfg, depth - 1).powi(2) + Expr::one();
            build(rng, cfg, depth - 1) / positive
        }
        5 => {
            let positive = build(rng, cfg, depth - 1).powi(2) + Expr::one();
            match rng.random_range(0..2) {
                0 => positive.ln(),
                _ => positive.sqrt(),
            }
        }
        _ => {
            let func = [Func::Sin, Func::Cos, Func::Exp][rng.random_range(0..3)];
            let arg = build(rng, cfg, depth - 1);
            if func == Func::Exp {
                // keep magnitudes moderate
                Expr::func(func, Expr::Const(0.1) * arg.sin())
            } else {
                Expr::func(func, arg)
            }
        }
    }
}
