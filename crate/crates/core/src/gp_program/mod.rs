//! Strongly-typed program trees.
//!
//! A program is layered: the raw image and optional convolution/pooling at
//! the bottom, a mandatory aggregation that turns an image into a number,
//! and optional arithmetic on top. The layering falls out of the type
//! rules: aggregation is the only node taking an image and returning a
//! scalar, and nothing maps a scalar back to an image.

mod dot;
mod generate;
mod sexpr;

use std::borrow::Cow;
use std::fmt;

use thiserror::Error;

use crate::image_ops::{self, AggStat, Filter, Image, ImageError, WindowSpec};

pub use dot::to_dot;
pub use generate::{generate, random_subtree, GenMethod, GenerateParams};
pub use sexpr::{deserialize, serialize, ParseError};

/// Depth bounds for evolved programs.
pub const DEPTH_MIN: usize = 2;
pub const DEPTH_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    Double,
    Image,
    Filter,
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub const ALL: [ArithOp; 4] = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div];

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ArithOp::Add => a + b,
            ArithOp::Sub => a - b,
            ArithOp::Mul => a * b,
            ArithOp::Div => protected_div(a, b),
        }
    }
}

/// Division that yields 0 for a zero denominator.
#[inline]
pub fn protected_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Arith {
        op: ArithOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
    },
    Agg {
        stat: AggStat,
        image: Box<Node>,
        window: Box<Node>,
    },
    Convolve {
        image: Box<Node>,
        filter: Box<Node>,
    },
    Pool {
        image: Box<Node>,
    },
    Input,
    Filter(Filter),
    Window(WindowSpec),
    Const(f64),
}

impl Node {
    pub fn arith(op: ArithOp, lhs: Node, rhs: Node) -> Node {
        Node::Arith {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn agg(stat: AggStat, image: Node, window: WindowSpec) -> Node {
        Node::Agg {
            stat,
            image: Box::new(image),
            window: Box::new(Node::Window(window)),
        }
    }

    pub fn convolve(image: Node, filter: Filter) -> Node {
        Node::Convolve {
            image: Box::new(image),
            filter: Box::new(Node::Filter(filter)),
        }
    }

    pub fn pool(image: Node) -> Node {
        Node::Pool {
            image: Box::new(image),
        }
    }

    pub fn output_type(&self) -> ValueType {
        match self {
            Node::Arith { .. } | Node::Agg { .. } | Node::Const(_) => ValueType::Double,
            Node::Convolve { .. } | Node::Pool { .. } | Node::Input => ValueType::Image,
            Node::Filter(_) => ValueType::Filter,
            Node::Window(_) => ValueType::Window,
        }
    }

    /// Types the child slots of this node must have, in order.
    pub fn child_types(&self) -> &'static [ValueType] {
        match self {
            Node::Arith { .. } => &[ValueType::Double, ValueType::Double],
            Node::Agg { .. } => &[ValueType::Image, ValueType::Window],
            Node::Convolve { .. } => &[ValueType::Image, ValueType::Filter],
            Node::Pool { .. } => &[ValueType::Image],
            _ => &[],
        }
    }

    pub fn children(&self) -> Vec<&Node> {
        match self {
            Node::Arith { lhs, rhs, .. } => vec![lhs, rhs],
            Node::Agg { image, window, .. } => vec![image, window],
            Node::Convolve { image, filter } => vec![image, filter],
            Node::Pool { image } => vec![image],
            _ => Vec::new(),
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Node> {
        match self {
            Node::Arith { lhs, rhs, .. } => vec![lhs, rhs],
            Node::Agg { image, window, .. } => vec![image, window],
            Node::Convolve { image, filter } => vec![image, filter],
            Node::Pool { image } => vec![image],
            _ => Vec::new(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.child_types().is_empty()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(Node::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Node::size).sum::<usize>()
    }

    /// Short label used by the DOT export and log messages.
    pub fn label(&self) -> String {
        match self {
            Node::Arith { op, .. } => match op {
                ArithOp::Add => "add",
                ArithOp::Sub => "sub",
                ArithOp::Mul => "mul",
                ArithOp::Div => "div",
            }
            .to_string(),
            Node::Agg { stat, .. } => agg_name(*stat).to_string(),
            Node::Convolve { .. } => "convolve".to_string(),
            Node::Pool { .. } => "pool".to_string(),
            Node::Input => "input".to_string(),
            Node::Filter(f) => {
                let vals: Vec<String> = f.coefficients().map(|v| format!("{v:.4}")).collect();
                format!("filter [{}]", vals.join(" "))
            }
            Node::Window(w) => format!(
                "window {} {:.3} {:.3} {:.3} {:.3}",
                w.shape, w.pos_x, w.pos_y, w.size_w, w.size_h
            ),
            Node::Const(v) => format!("const {v:.4}"),
        }
    }
}

pub(crate) fn agg_name(stat: AggStat) -> &'static str {
    match stat {
        AggStat::Min => "agg-min",
        AggStat::Max => "agg-max",
        AggStat::Mean => "agg-mean",
        AggStat::Std => "agg-std",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("node {index} ({label}) has a child of type {got:?} where {expected:?} is required")]
    ChildType {
        index: usize,
        label: String,
        expected: ValueType,
        got: ValueType,
    },
    #[error("root produces {0:?}, expected Double")]
    RootType(ValueType),
    #[error("program contains no aggregation node")]
    NoAggregation,
    #[error("depth {depth} outside bounds {min}..={max}")]
    Depth {
        depth: usize,
        min: usize,
        max: usize,
    },
    #[error("invalid window parameters at node {0}")]
    Window(usize),
}

/// One node of a preorder traversal.
#[derive(Debug, Clone, Copy)]
pub struct NodeInfo {
    pub index: usize,
    pub depth: usize,
    pub ty: ValueType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramTree {
    root: Node,
}

impl ProgramTree {
    pub fn new(root: Node) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn node_count(&self) -> usize {
        self.root.size()
    }

    /// Preorder listing of every node with its depth (root depth 1).
    pub fn nodes(&self) -> Vec<NodeInfo> {
        fn walk(n: &Node, depth: usize, out: &mut Vec<NodeInfo>) {
            out.push(NodeInfo {
                index: out.len(),
                depth,
                ty: n.output_type(),
            });
            for c in n.children() {
                walk(c, depth + 1, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, 1, &mut out);
        out
    }

    /// Subtree rooted at preorder position `index`.
    pub fn subtree(&self, index: usize) -> Option<&Node> {
        fn find<'a>(n: &'a Node, target: usize, counter: &mut usize) -> Option<&'a Node> {
            if *counter == target {
                return Some(n);
            }
            *counter += 1;
            for c in n.children() {
                if let Some(found) = find(c, target, counter) {
                    return Some(found);
                }
            }
            None
        }
        find(&self.root, index, &mut 0)
    }

    /// Replaces the subtree at preorder position `index`, returning the old one.
    pub fn replace_subtree(&mut self, index: usize, new: Node) -> Option<Node> {
        fn find<'a>(n: &'a mut Node, target: usize, counter: &mut usize) -> Option<&'a mut Node> {
            if *counter == target {
                return Some(n);
            }
            *counter += 1;
            for c in n.children_mut() {
                if let Some(found) = find(c, target, counter) {
                    return Some(found);
                }
            }
            None
        }
        let slot = find(&mut self.root, index, &mut 0)?;
        Some(std::mem::replace(slot, new))
    }

    pub fn count_convolutions(&self) -> usize {
        self.filters().len()
    }

    pub fn contains_aggregation(&self) -> bool {
        fn any_agg(n: &Node) -> bool {
            matches!(n, Node::Agg { .. }) || n.children().into_iter().any(any_agg)
        }
        any_agg(&self.root)
    }

    /// Filters attached to convolve nodes, in preorder of their convolve nodes.
    pub fn filters(&self) -> Vec<&Filter> {
        fn walk<'a>(n: &'a Node, out: &mut Vec<&'a Filter>) {
            if let Node::Convolve { filter, .. } = n {
                if let Node::Filter(f) = filter.as_ref() {
                    out.push(f);
                }
            }
            for c in n.children() {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn filters_mut(&mut self) -> Vec<&mut Filter> {
        fn walk<'a>(n: &'a mut Node, out: &mut Vec<&'a mut Filter>) {
            match n {
                Node::Convolve { image, filter } => {
                    if let Node::Filter(f) = filter.as_mut() {
                        out.push(f);
                    }
                    walk(image, out);
                }
                Node::Arith { lhs, rhs, .. } => {
                    walk(lhs, out);
                    walk(rhs, out);
                }
                Node::Agg { image, .. } => walk(image, out),
                Node::Pool { image } => walk(image, out),
                _ => {}
            }
        }
        let mut out = Vec::new();
        walk(&mut self.root, &mut out);
        out
    }

    /// Checks typing and the presence of an aggregation, without depth limits.
    pub fn validate_types(&self) -> Result<(), ValidationError> {
        fn check(n: &Node, counter: &mut usize) -> Result<(), ValidationError> {
            let index = *counter;
            *counter += 1;
            if let Node::Window(w) = n {
                if !w.is_valid() {
                    return Err(ValidationError::Window(index));
                }
            }
            for (child, expected) in n.children().into_iter().zip(n.child_types()) {
                let got = child.output_type();
                if got != *expected {
                    return Err(ValidationError::ChildType {
                        index,
                        label: n.label(),
                        expected: *expected,
                        got,
                    });
                }
                check(child, counter)?;
            }
            Ok(())
        }
        let root_ty = self.root.output_type();
        if root_ty != ValueType::Double {
            return Err(ValidationError::RootType(root_ty));
        }
        check(&self.root, &mut 0)?;
        if !self.contains_aggregation() {
            return Err(ValidationError::NoAggregation);
        }
        Ok(())
    }

    /// Full validity check: typing plus depth bounds.
    pub fn validate(&self, depth_min: usize, depth_max: usize) -> Result<(), ValidationError> {
        self.validate_types()?;
        let depth = self.depth();
        if depth < depth_min || depth > depth_max {
            return Err(ValidationError::Depth {
                depth,
                min: depth_min,
                max: depth_max,
            });
        }
        Ok(())
    }
}

impl fmt::Display for ProgramTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("ill-typed program: {0}")]
    Type(String),
}

/// Raw (pre-sigmoid) output of the program on `img`.
pub fn evaluate(tree: &ProgramTree, img: &Image) -> Result<f64, EvalError> {
    eval_double(tree.root(), img)
}

pub(crate) fn eval_double(n: &Node, img: &Image) -> Result<f64, EvalError> {
    match n {
        Node::Arith { op, lhs, rhs } => {
            let a = eval_double(lhs, img)?;
            let b = eval_double(rhs, img)?;
            Ok(op.apply(a, b))
        }
        Node::Agg {
            stat,
            image,
            window,
        } => {
            let im = eval_image(image, img)?;
            let w = window_of(window)?;
            Ok(image_ops::aggregate(&im, w, *stat)?)
        }
        Node::Const(v) => Ok(*v),
        other => Err(EvalError::Type(format!(
            "{} used as a number",
            other.label()
        ))),
    }
}

pub(crate) fn eval_image<'a>(n: &Node, img: &'a Image) -> Result<Cow<'a, Image>, EvalError> {
    match n {
        Node::Input => Ok(Cow::Borrowed(img)),
        Node::Convolve { image, filter } => {
            let im = eval_image(image, img)?;
            let f = filter_of(filter)?;
            Ok(Cow::Owned(image_ops::convolve(&im, f)?))
        }
        Node::Pool { image } => {
            let im = eval_image(image, img)?;
            Ok(Cow::Owned(image_ops::pool(&im)?))
        }
        other => Err(EvalError::Type(format!(
            "{} used as an image",
            other.label()
        ))),
    }
}

pub(crate) fn filter_of(n: &Node) -> Result<&Filter, EvalError> {
    match n {
        Node::Filter(f) => Ok(f),
        other => Err(EvalError::Type(format!(
            "{} used as a filter",
            other.label()
        ))),
    }
}

pub(crate) fn window_of(n: &Node) -> Result<&WindowSpec, EvalError> {
    match n {
        Node::Window(w) => Ok(w),
        other => Err(EvalError::Type(format!(
            "{} used as a window",
            other.label()
        ))),
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Class label for a sigmoid score: scores above 0.5 are class 0, the rest
/// (including exactly 0.5) class 1.
#[inline]
pub fn label_for_score(y: f64) -> u8 {
    if y > 0.5 {
        0
    } else {
        1
    }
}

pub fn classify(tree: &ProgramTree, img: &Image) -> Result<u8, EvalError> {
    Ok(label_for_score(sigmoid(evaluate(tree, img)?)))
}

/// A program together with its cached training fitness.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub tree: ProgramTree,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(tree: ProgramTree) -> Self {
        Self {
            tree,
            fitness: None,
        }
    }

    /// Fitness, treating an unevaluated individual as worst-case.
    pub fn fitness_or_zero(&self) -> f64 {
        self.fitness.unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_ops::{convolve, pool, WindowShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn smallest() -> ProgramTree {
        ProgramTree::new(Node::agg(AggStat::Mean, Node::Input, WindowSpec::full()))
    }

    #[test]
    fn mean_of_constant_image() {
        let img = Image::filled(5, 5, 0.5);
        assert_eq!(evaluate(&smallest(), &img).unwrap(), 0.5);
        assert_eq!(smallest().depth(), 2);
        assert_eq!(smallest().node_count(), 3);
    }

    #[test]
    fn protected_division_by_zero() {
        let t = Node::arith(ArithOp::Div, Node::Const(1.0), Node::Const(0.0));
        let img = Image::filled(3, 3, 0.0);
        assert_eq!(eval_double(&t, &img).unwrap(), 0.0);
    }

    #[test]
    fn fig1_shape_matches_manual_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = Image::random(12, 10, &mut rng);
        let f = Filter::random(&mut rng);
        let w = WindowSpec::new(WindowShape::Rectangle, 0.1, 0.1, 0.5, 0.5);
        let tree = ProgramTree::new(Node::agg(AggStat::Min, Node::convolve(Node::Input, f), w));
        // output of conv is 10x8; window rows floor(1.0)=1.., extent round(5)=5 / cols 0.., round(4)=4
        let conv = convolve(&img, &f).unwrap();
        let mut expected = f64::INFINITY;
        for r in 1..6 {
            for c in 0..4 {
                expected = expected.min(conv.get(r, c));
            }
        }
        assert_eq!(evaluate(&tree, &img).unwrap(), expected);
        assert_eq!(tree.depth(), 3);
    }

    #[test]
    fn too_small_propagates() {
        let mut node = Node::Input;
        for _ in 0..4 {
            node = Node::pool(node);
        }
        let tree = ProgramTree::new(Node::agg(AggStat::Max, node, WindowSpec::full()));
        let img = Image::filled(8, 8, 1.0);
        assert!(matches!(
            evaluate(&tree, &img),
            Err(EvalError::Image(ImageError::ImageTooSmall { .. }))
        ));
        let ok = pool(&pool(&pool(&img).unwrap()).unwrap()).unwrap();
        assert_eq!(ok.height(), 1);
    }

    #[test]
    fn classify_boundaries() {
        let img = Image::filled(3, 3, 0.0);
        let t = |v: f64| {
            ProgramTree::new(Node::arith(
                ArithOp::Add,
                Node::Const(v),
                Node::agg(AggStat::Mean, Node::Input, WindowSpec::full()),
            ))
        };
        assert_eq!(classify(&t(0.0), &img).unwrap(), 1);
        assert_eq!(classify(&t(10.0), &img).unwrap(), 0);
        assert_eq!(classify(&t(-10.0), &img).unwrap(), 1);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        let y = sigmoid(500.0);
        assert!(y.is_finite() && y <= 1.0);
        let y = sigmoid(-800.0);
        assert!(y.is_finite() && y >= 0.0);
    }

    #[test]
    fn validation_catches_bad_typing() {
        let bad = ProgramTree::new(Node::Agg {
            stat: AggStat::Min,
            image: Box::new(Node::Const(1.0)),
            window: Box::new(Node::Window(WindowSpec::full())),
        });
        assert!(matches!(
            bad.validate_types(),
            Err(ValidationError::ChildType { .. })
        ));
        let no_agg = ProgramTree::new(Node::arith(
            ArithOp::Add,
            Node::Const(1.0),
            Node::Const(2.0),
        ));
        assert_eq!(no_agg.validate_types(), Err(ValidationError::NoAggregation));
        let img_root = ProgramTree::new(Node::Input);
        assert_eq!(
            img_root.validate_types(),
            Err(ValidationError::RootType(ValueType::Image))
        );
        assert!(smallest().validate(DEPTH_MIN, DEPTH_MAX).is_ok());
        assert!(matches!(
            smallest().validate(3, 10),
            Err(ValidationError::Depth { .. })
        ));
    }

    #[test]
    fn subtree_replacement_by_preorder_index() {
        let mut t = ProgramTree::new(Node::agg(
            AggStat::Mean,
            Node::convolve(Node::Input, Filter::filled(0.5)),
            WindowSpec::full(),
        ));
        let infos = t.nodes();
        assert_eq!(infos.len(), 5);
        assert_eq!(infos[1].ty, ValueType::Image);
        assert_eq!(infos[3].ty, ValueType::Filter);
        assert_eq!(infos[3].depth, 3);
        let old = t
            .replace_subtree(3, Node::Filter(Filter::filled(0.25)))
            .unwrap();
        assert_eq!(old, Node::Filter(Filter::filled(0.5)));
        assert_eq!(t.filters(), vec![&Filter::filled(0.25)]);
        assert!(t.replace_subtree(5, Node::Input).is_none());
    }
}
