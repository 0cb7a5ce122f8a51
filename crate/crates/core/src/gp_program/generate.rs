use rand::Rng;

use super::{ArithOp, Node, ProgramTree, ValueType};
use crate::image_ops::{AggStat, Filter, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMethod {
    Full,
    Grow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateParams {
    /// Relative weight of a constant leaf among the scalar-typed choices
    /// when growing. 1.0 gives it the same weight as each function.
    pub const_weight: f64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        Self { const_weight: 1.0 }
    }
}

/// Ramped half-and-half initialisation: the target depth is drawn uniformly
/// from `depth_min..=depth_max` and the tree is built with either the full
/// or the grow method. Trees that end up too shallow or without an
/// aggregation node are redrawn.
pub fn generate<R: Rng + ?Sized>(rng: &mut R, depth_min: usize, depth_max: usize) -> ProgramTree {
    generate_with(rng, depth_min, depth_max, &GenerateParams::default())
}

pub fn generate_with<R: Rng + ?Sized>(
    rng: &mut R,
    depth_min: usize,
    depth_max: usize,
    params: &GenerateParams,
) -> ProgramTree {
    assert!(
        2 <= depth_min && depth_min <= depth_max,
        "invalid depth range {depth_min}..={depth_max}"
    );
    loop {
        let depth = rng.gen_range(depth_min..=depth_max);
        let method = if rng.gen_bool(0.5) {
            GenMethod::Full
        } else {
            GenMethod::Grow
        };
        let tree = ProgramTree::new(build(rng, ValueType::Double, depth, method, params));
        if tree.depth() >= depth_min && tree.contains_aggregation() {
            return tree;
        }
    }
}

/// Random subtree producing `ty`, no deeper than `max_depth`.
pub fn random_subtree<R: Rng + ?Sized>(
    rng: &mut R,
    ty: ValueType,
    max_depth: usize,
    method: GenMethod,
) -> Node {
    build(
        rng,
        ty,
        max_depth.max(1),
        method,
        &GenerateParams::default(),
    )
}

fn build<R: Rng + ?Sized>(
    rng: &mut R,
    ty: ValueType,
    remaining: usize,
    method: GenMethod,
    params: &GenerateParams,
) -> Node {
    match ty {
        ValueType::Filter => Node::Filter(Filter::random(rng)),
        ValueType::Window => Node::Window(WindowSpec::random(rng)),
        ValueType::Image => {
            if remaining <= 1 {
                return Node::Input;
            }
            let pick = match method {
                GenMethod::Full => rng.gen_range(0..2),
                GenMethod::Grow => rng.gen_range(0..3),
            };
            match pick {
                0 => Node::Convolve {
                    image: Box::new(build(rng, ValueType::Image, remaining - 1, method, params)),
                    filter: Box::new(Node::Filter(Filter::random(rng))),
                },
                1 => Node::Pool {
                    image: Box::new(build(rng, ValueType::Image, remaining - 1, method, params)),
                },
                _ => Node::Input,
            }
        }
        ValueType::Double => {
            if remaining <= 1 {
                return Node::Const(rng.gen_range(-1.0..=1.0));
            }
            // four arithmetic and four aggregation functions, plus the
            // constant leaf when growing
            let funcs = 8.0;
            let total = match method {
                GenMethod::Full => funcs,
                GenMethod::Grow => funcs + params.const_weight,
            };
            let x = rng.gen::<f64>() * total;
            if x >= funcs {
                return Node::Const(rng.gen_range(-1.0..=1.0));
            }
            let i = (x as usize).min(7);
            if i < 4 {
                Node::Arith {
                    op: ArithOp::ALL[i],
                    lhs: Box::new(build(rng, ValueType::Double, remaining - 1, method, params)),
                    rhs: Box::new(build(rng, ValueType::Double, remaining - 1, method, params)),
                }
            } else {
                Node::Agg {
                    stat: AggStat::ALL[i - 4],
                    image: Box::new(build(rng, ValueType::Image, remaining - 1, method, params)),
                    window: Box::new(Node::Window(WindowSpec::random(rng))),
                }
            }
        }
    }
}
