//! Reverse-mode differentiation of a program composed with a sigmoid and
//! binary cross-entropy, with respect to the convolution filters.
//!
//! The forward pass records every intermediate value on a [`ForwardTape`].
//! The backward pass starts from `dL/dx = y - t` at the program output
//! (sigmoid and cross-entropy combined) and walks the tape root-first:
//!
//! * arithmetic nodes apply the usual scalar partials; protected division
//!   has zero partials where it returns its protected value,
//! * aggregation either broadcasts the scalar gradient over the whole child
//!   image ([`AggGradMode::PassThrough`]) or applies the exact Jacobian of the
//!   window statistic ([`AggGradMode::Exact`]),
//! * pooling routes each block's gradient to its maximum pixel,
//! * convolution gates by the ReLU, then `dL/dw` is the valid convolution of
//!   the input with the output gradient and `dL/dx` is the full convolution
//!   of the output gradient with the rotated kernel.

use thiserror::Error;

use crate::gp_program::{sigmoid, ArithOp, EvalError, Node, ProgramTree};
use crate::image_ops::{
    self, aggregate_coords, pool_argmax, realize_window, AggStat, Filter, Image, WindowSpec,
};

/// Bounds applied to a prediction before taking logarithms.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggGradMode {
    /// Send the upstream scalar unchanged to every pixel of the child image.
    #[default]
    PassThrough,
    /// Exact derivative of the window statistic.
    Exact,
}

/// Cross-entropy target for a class label: the program's positive side
/// (score above 0.5) is class 0.
#[inline]
pub fn target_for_label(label: u8) -> f64 {
    if label == 0 {
        1.0
    } else {
        0.0
    }
}

/// Binary cross-entropy of a prediction `y` against target `t`, with `y`
/// clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub fn ce_loss(y: f64, t: f64) -> f64 {
    let y = y.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(t * y.ln() + (1.0 - t) * (1.0 - y).ln())
}

/// Mean cross-entropy over `(prediction, target)` pairs.
pub fn mean_ce_loss(pairs: &[(f64, f64)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|&(y, t)| ce_loss(y, t)).sum::<f64>() / pairs.len() as f64
}

/// Cross-entropy computed from the pre-activation `x` without forming
/// `sigmoid(x)`; exact for any magnitude of `x`.
pub fn ce_loss_logit(x: f64, t: f64) -> f64 {
    x.max(0.0) - x * t + (-x.abs()).exp().ln_1p()
}

/// Gradient of the loss at the program output.
#[inline]
pub fn output_seed(y: f64, t: f64) -> f64 {
    y - t
}

#[derive(Debug, Clone)]
pub enum TapeValue {
    Scalar(f64),
    Image(Image),
    Filter(Filter),
    Window(WindowSpec),
}

impl TapeValue {
    fn scalar(&self) -> f64 {
        match self {
            TapeValue::Scalar(v) => *v,
            _ => unreachable!("tape slot is not a scalar"),
        }
    }

    fn image(&self) -> &Image {
        match self {
            TapeValue::Image(im) => im,
            _ => unreachable!("tape slot is not an image"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TapeEntry<'a> {
    pub node: &'a Node,
    pub children: Vec<usize>,
    pub value: TapeValue,
}

/// Values of every node for one input image, in preorder (parents before
/// children).
#[derive(Debug, Clone)]
pub struct ForwardTape<'a> {
    pub entries: Vec<TapeEntry<'a>>,
    /// Program output before the sigmoid.
    pub x: f64,
    /// `sigmoid(x)`.
    pub y: f64,
}

pub fn forward<'a>(tree: &'a ProgramTree, img: &Image) -> Result<ForwardTape<'a>, EvalError> {
    let mut entries = Vec::new();
    record(tree.root(), img, &mut entries)?;
    let x = entries[0].value.scalar();
    Ok(ForwardTape {
        entries,
        x,
        y: sigmoid(x),
    })
}

fn record<'a>(n: &'a Node, img: &Image, tape: &mut Vec<TapeEntry<'a>>) -> Result<usize, EvalError> {
    let idx = tape.len();
    tape.push(TapeEntry {
        node: n,
        children: Vec::new(),
        value: TapeValue::Scalar(0.0),
    });
    let mut children = Vec::new();
    for c in n.children() {
        children.push(record(c, img, tape)?);
    }
    let value = match n {
        Node::Arith { op, .. } => TapeValue::Scalar(op.apply(
            tape[children[0]].value.scalar(),
            tape[children[1]].value.scalar(),
        )),
        Node::Agg { stat, .. } => {
            let im = tape[children[0]].value.image();
            let w = match &tape[children[1]].value {
                TapeValue::Window(w) => w,
                _ => return Err(EvalError::Type("aggregation without a window".into())),
            };
            TapeValue::Scalar(image_ops::aggregate(im, w, *stat)?)
        }
        Node::Convolve { .. } => {
            let im = tape[children[0]].value.image();
            let f = match &tape[children[1]].value {
                TapeValue::Filter(f) => f,
                _ => return Err(EvalError::Type("convolve without a filter".into())),
            };
            TapeValue::Image(image_ops::convolve(im, f)?)
        }
        Node::Pool { .. } => TapeValue::Image(image_ops::pool(tape[children[0]].value.image())?),
        Node::Input => TapeValue::Image(img.clone()),
        Node::Filter(f) => TapeValue::Filter(*f),
        Node::Window(w) => TapeValue::Window(*w),
        Node::Const(v) => TapeValue::Scalar(*v),
    };
    tape[idx].children = children;
    tape[idx].value = value;
    Ok(idx)
}

impl ForwardTape<'_> {
    /// Discrete choices made during the forward pass: ReLU activity, pooling
    /// winners, min/max winners, zero standard deviations and division
    /// denominators' signs. Two parameter settings with the same signature
    /// lie on the same smooth piece of the loss surface.
    pub fn branch_signature(&self) -> Vec<u64> {
        let mut sig = Vec::new();
        for e in &self.entries {
            match e.node {
                Node::Convolve { .. } => {
                    sig.extend(e.value.image().pixels().iter().map(|v| (*v > 0.0) as u64));
                }
                Node::Pool { .. } => {
                    let x = self.entries[e.children[0]].value.image();
                    for r in 0..x.height() / 2 {
                        for c in 0..x.width() / 2 {
                            let (ar, ac) = pool_argmax(x, 2 * r, 2 * c);
                            sig.push((ar * x.width() + ac) as u64);
                        }
                    }
                }
                Node::Agg { stat, .. } => {
                    let x = self.entries[e.children[0]].value.image();
                    let w = match &self.entries[e.children[1]].value {
                        TapeValue::Window(w) => w,
                        _ => continue,
                    };
                    let coords = realize_window(w, x.height(), x.width());
                    match stat {
                        AggStat::Min | AggStat::Max => {
                            sig.push(extreme_position(x, &coords, *stat) as u64)
                        }
                        AggStat::Std => sig.push((e.value.scalar() == 0.0) as u64),
                        AggStat::Mean => {}
                    }
                }
                Node::Arith {
                    op: ArithOp::Div, ..
                } => {
                    let b = self.entries[e.children[1]].value.scalar();
                    sig.push(if b > 0.0 {
                        2
                    } else if b < 0.0 {
                        0
                    } else {
                        1
                    });
                }
                _ => {}
            }
        }
        sig
    }
}

/// Position within `coords` of the first pixel attaining the minimum (or
/// maximum) value.
fn extreme_position(img: &Image, coords: &[(usize, usize)], stat: AggStat) -> usize {
    let mut best = 0;
    let mut best_v = img.get(coords[0].0, coords[0].1);
    for (i, &(r, c)) in coords.iter().enumerate().skip(1) {
        let v = img.get(r, c);
        let better = match stat {
            AggStat::Min => v < best_v,
            _ => v > best_v,
        };
        if better {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Loss gradient for one convolve node's filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGradient {
    /// Preorder index of the convolve node.
    pub node: usize,
    pub grad: [[f64; 3]; 3],
}

/// Filter gradients of one backward pass, ordered like
/// [`ProgramTree::filters`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientSet {
    /// `dL/dx` at the program output.
    pub seed: f64,
    pub entries: Vec<ConvGradient>,
}

impl GradientSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.grad.iter().flatten().all(|v| v.is_finite()))
    }

    /// Gradient entries flattened row-major, filter by filter.
    pub fn flat(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| e.grad.iter().flatten().copied())
            .collect()
    }
}

enum Grad {
    Scalar(f64),
    Image(Image),
}

pub fn backward(tape: &ForwardTape<'_>, t: f64, mode: AggGradMode) -> GradientSet {
    let seed = output_seed(tape.y, t);
    let n = tape.entries.len();
    let mut grads: Vec<Option<Grad>> = (0..n).map(|_| None).collect();
    grads[0] = Some(Grad::Scalar(seed));
    let mut entries = Vec::new();

    for i in 0..n {
        let Some(g) = grads[i].take() else { continue };
        let e = &tape.entries[i];
        match (e.node, g) {
            (Node::Arith { op, .. }, Grad::Scalar(g)) => {
                let (ia, ib) = (e.children[0], e.children[1]);
                let a = tape.entries[ia].value.scalar();
                let b = tape.entries[ib].value.scalar();
                let (da, db) = arith_partials(*op, a, b);
                grads[ia] = Some(Grad::Scalar(g * da));
                grads[ib] = Some(Grad::Scalar(g * db));
            }
            (Node::Agg { stat, .. }, Grad::Scalar(g)) => {
                let ic = e.children[0];
                let x = tape.entries[ic].value.image();
                let w = match &tape.entries[e.children[1]].value {
                    TapeValue::Window(w) => w,
                    _ => unreachable!("aggregation without a window"),
                };
                grads[ic] = Some(Grad::Image(agg_backward(x, w, *stat, g, mode)));
            }
            (Node::Pool { .. }, Grad::Image(g)) => {
                let ic = e.children[0];
                let x = tape.entries[ic].value.image();
                grads[ic] = Some(Grad::Image(pool_backward(x, &g)));
            }
            (Node::Convolve { .. }, Grad::Image(g)) => {
                let (ix, iw) = (e.children[0], e.children[1]);
                let out = e.value.image();
                let gated = relu_gate(out, &g);
                let x = tape.entries[ix].value.image();
                let w = match &tape.entries[iw].value {
                    TapeValue::Filter(f) => f,
                    _ => unreachable!("convolve without a filter"),
                };
                entries.push(ConvGradient {
                    node: i,
                    grad: conv_weight_grad(x, &gated),
                });
                grads[ix] = Some(Grad::Image(conv_input_grad(&gated, w)));
            }
            _ => {}
        }
    }
    GradientSet { seed, entries }
}

/// Partial derivatives `(d/da, d/db)` of an arithmetic node.
pub fn arith_partials(op: ArithOp, a: f64, b: f64) -> (f64, f64) {
    match op {
        ArithOp::Add => (1.0, 1.0),
        ArithOp::Sub => (1.0, -1.0),
        ArithOp::Mul => (b, a),
        ArithOp::Div => {
            if b == 0.0 {
                (0.0, 0.0)
            } else {
                (1.0 / b, -a / (b * b))
            }
        }
    }
}

/// Gradient of a window statistic with respect to its input image.
pub fn agg_backward(x: &Image, w: &WindowSpec, stat: AggStat, g: f64, mode: AggGradMode) -> Image {
    if mode == AggGradMode::PassThrough {
        return Image::filled(x.height(), x.width(), g);
    }
    let mut out = Image::filled(x.height(), x.width(), 0.0);
    let coords = realize_window(w, x.height(), x.width());
    let n = coords.len() as f64;
    match stat {
        AggStat::Min | AggStat::Max => {
            let (r, c) = coords[extreme_position(x, &coords, stat)];
            out.set(r, c, g);
        }
        AggStat::Mean => {
            for &(r, c) in &coords {
                out.set(r, c, g / n);
            }
        }
        AggStat::Std => {
            let std = aggregate_coords(x, &coords, AggStat::Std).expect("non-empty window");
            if std > 0.0 {
                let mean = aggregate_coords(x, &coords, AggStat::Mean).expect("non-empty window");
                for &(r, c) in &coords {
                    out.set(r, c, g * (x.get(r, c) - mean) / (n * std));
                }
            }
        }
    }
    out
}

/// Routes each pooled gradient to the winning pixel of its 2x2 block.
pub fn pool_backward(x: &Image, g: &Image) -> Image {
    let mut out = Image::filled(x.height(), x.width(), 0.0);
    for r in 0..g.height() {
        for c in 0..g.width() {
            let (ar, ac) = pool_argmax(x, 2 * r, 2 * c);
            out.set(ar, ac, out.get(ar, ac) + g.get(r, c));
        }
    }
    out
}

/// Zeroes the upstream gradient where the ReLU was inactive.
pub fn relu_gate(out: &Image, g: &Image) -> Image {
    Image::from_fn(g.height(), g.width(), |r, c| {
        if out.get(r, c) > 0.0 {
            g.get(r, c)
        } else {
            0.0
        }
    })
}

/// `dL/dw`: valid convolution of the layer input with the output gradient.
pub fn conv_weight_grad(x: &Image, gy: &Image) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for r in 0..gy.height() {
                for c in 0..gy.width() {
                    acc += gy.get(r, c) * x.get(r + a, c + b);
                }
            }
            *cell = acc;
        }
    }
    out
}

/// `dL/dx`: the output gradient zero-padded by two on every side, then
/// convolved (valid) with the kernel rotated by 180 degrees.
pub fn conv_input_grad(gy: &Image, w: &Filter) -> Image {
    let (ph, pw) = (gy.height() + 4, gy.width() + 4);
    let padded = Image::from_fn(ph, pw, |r, c| {
        if (2..gy.height() + 2).contains(&r) && (2..gy.width() + 2).contains(&c) {
            gy.get(r - 2, c - 2)
        } else {
            0.0
        }
    });
    image_ops::convolve_linear(&padded, &w.flipped()).expect("padded gradient is at least 5x5")
}

/// Filter gradients of the loss for one labelled image.
pub fn gradients(
    tree: &ProgramTree,
    img: &Image,
    t: f64,
    mode: AggGradMode,
) -> Result<GradientSet, EvalError> {
    let tape = forward(tree, img)?;
    Ok(backward(&tape, t, mode))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GradCheckError {
    #[error("program has no convolve node")]
    NoConvolution,
    #[error("finite-difference step crosses a non-differentiable point (coefficient {0})")]
    KinkCrossed(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coefficients: usize,
}

/// Relative error between an analytic and a numeric derivative, falling
/// back to the absolute error when both are below `1e-8`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

/// Compares exact-mode analytic filter gradients against central finite
/// differences with step `h`.
pub fn grad_check(
    tree: &ProgramTree,
    img: &Image,
    t: f64,
    h: f64,
) -> Result<GradCheckReport, GradCheckError> {
    grad_check_with(tree, img, t, h, |tree, img, t| {
        gradients(tree, img, t, AggGradMode::Exact)
    })
}

/// As [`grad_check`], with the analytic side supplied by the caller.
pub fn grad_check_with<F>(
    tree: &ProgramTree,
    img: &Image,
    t: f64,
    h: f64,
    analytic: F,
) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&ProgramTree, &Image, f64) -> Result<GradientSet, EvalError>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let n_conv = tree.count_convolutions();
    if n_conv == 0 {
        return Err(GradCheckError::NoConvolution);
    }
    let base_sig = forward(tree, img)?.branch_signature();
    let grads = analytic(tree, img, t)?.flat();

    let mut max_err: f64 = 0.0;
    for (k, &g) in grads.iter().enumerate().take(n_conv * 9) {
        let (fi, a, b) = (k / 9, (k % 9) / 3, k % 3);
        let perturbed = |delta: f64| -> Result<(f64, Vec<u64>), GradCheckError> {
            let mut t2 = tree.clone();
            t2.filters_mut()[fi].0[a][b] += delta;
            let tape = forward(&t2, img)?;
            Ok((ce_loss_logit(tape.x, t), tape.branch_signature()))
        };
        let (lp, sp) = perturbed(h)?;
        let (lm, sm) = perturbed(-h)?;
        if sp != base_sig || sm != base_sig {
            return Err(GradCheckError::KinkCrossed(k));
        }
        let numeric = (lp - lm) / (2.0 * h);
        max_err = max_err.max(relative_error(g, numeric));
    }
    Ok(GradCheckReport {
        max_rel_error: max_err,
        coefficients: n_conv * 9,
    })
}
