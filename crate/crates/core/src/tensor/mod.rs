//! Dense `f64` tensors with tape-ordered reverse-mode differentiation.
//!
//! Every tensor produced by an op whose inputs require gradients records
//! its inputs and a backward rule. Nodes receive a monotonically increasing
//! sequence number at creation, so sorting reachable nodes by that number
//! yields a topological order of the graph (inputs always precede outputs).
//! [`Tensor::backward`] walks that order in reverse.
//!
//! Tensors that do not require gradients never record anything and never
//! allocate a gradient buffer; they act as constants.

mod check;
mod conv;
mod linalg;
mod ops;

use std::cell::{Cell, Ref, RefCell, RefMut};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{DefaultHasher, Hasher};
use std::rc::Rc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub use check::{grad_check, grad_check_params, grad_check_params_sampled, grad_check_params_sampled_smooth, GradCheckReport};
pub use conv::conv_output_size;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
    static FAULT: Cell<bool> = const { Cell::new(false) };
    static KINKS: RefCell<Option<DefaultHasher>> = const { RefCell::new(None) };
}

/// Records which side of its kink every input of a piecewise-linear op
/// (`relu`, `leaky_relu`, `abs`) lies on, when a trace is active.
pub(crate) fn note_kinks(x: &[f64]) {
    KINKS.with(|k| {
        if let Some(h) = k.borrow_mut().as_mut() {
            for v in x {
                h.write_u8(if *v > 0.0 { 2 } else if *v < 0.0 { 0 } else { 1 });
            }
        }
    });
}

/// Runs `f` and returns a fingerprint of the kink sides visited.
pub(crate) fn kink_trace<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let prev = KINKS.with(|k| k.replace(Some(DefaultHasher::new())));
    let out = f();
    let h = KINKS.with(|k| k.replace(prev)).map_or(0, |h| h.finish());
    (out, h)
}

/// Test fixture: corrupts the leaky-ReLU backward rule on this thread so
/// that gradient checks can be shown to fail.
#[doc(hidden)]
pub fn set_backward_fault(on: bool) {
    FAULT.with(|f| f.set(on));
}

pub(crate) fn backward_fault() -> bool {
    FAULT.with(|f| f.get())
}

/// Runs `f` without recording any graph: every op result is a constant.
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|g| g.replace(false)));
    f()
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Backward rule: maps the output gradient to one optional gradient per input.
pub(crate) type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<Option<Vec<f64>>>>;

struct Op {
    name: &'static str,
    inputs: Vec<Tensor>,
    backward: BackwardFn,
}

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    op: Option<Op>,
}

/// Reference-counted handle to a node of the gradient graph.
///
/// Cloning is cheap and shares the underlying buffer.
#[derive(Clone)]
pub struct Tensor(Rc<Node>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.0.data.borrow();
        let preview: Vec<f64> = data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.0.op.as_ref().map(|o| o.name))
            .field("data", &preview)
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn from_node(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, op: Option<Op>) -> Self {
        Tensor(Rc::new(Node {
            id: next_id(),
            shape,
            data: RefCell::new(data),
            requires_grad,
            grad: RefCell::new(None),
            op,
        }))
    }

    /// Constant tensor. Fails when the buffer length does not match the shape.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::invalid("tensor", format!("zero-sized dimension in {shape:?}")));
        }
        if numel(shape) != data.len() {
            return Err(Error::shape("tensor", shape, &[data.len()]));
        }
        Ok(Self::from_node(shape.to_vec(), data, false, None))
    }

    /// Trainable leaf.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let t = Self::new(shape, data)?;
        Ok(t.into_leaf(true))
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_node(vec![1], vec![v], false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_node(shape.to_vec(), vec![0.0; numel(shape)], false, None)
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        Self::from_node(shape.to_vec(), vec![v; numel(shape)], false, None)
    }

    pub fn randn<R: Rng + ?Sized>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let data = (0..numel(shape))
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z * std
            })
            .collect();
        Self::from_node(shape.to_vec(), data, false, None)
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let data = (0..numel(shape)).map(|_| rng.random_range(lo..hi)).collect();
        Self::from_node(shape.to_vec(), data, false, None)
    }

    /// Fresh leaf sharing no state with `self`, with the given grad flag.
    pub fn into_leaf(self, requires_grad: bool) -> Self {
        let data = self.0.data.borrow().clone();
        Self::from_node(self.0.shape.clone(), data, requires_grad, None)
    }

    /// Constant copy cut from the graph.
    pub fn detach(&self) -> Self {
        Self::from_node(self.0.shape.clone(), self.0.data.borrow().clone(), false, None)
    }

    pub(crate) fn from_op(
        name: &'static str,
        shape: Vec<usize>,
        data: Vec<f64>,
        inputs: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Self {
        debug_assert_eq!(numel(&shape), data.len(), "{name}");
        let requires_grad = GRAD_ENABLED.with(|g| g.get()) && inputs.iter().any(|t| t.requires_grad());
        let op = requires_grad.then(|| Op {
            name,
            inputs,
            backward,
        });
        Self::from_node(shape, data, requires_grad, op)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel(&self.0.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.op.is_none()
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.0.data.borrow()
    }

    /// Mutable access to the buffer. Only meaningful on leaves; mutating a
    /// tensor that an existing graph still references invalidates that graph.
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.0.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        self.0.data.borrow()[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// Accumulates gradients of this scalar into every reachable leaf that
    /// requires them. Calling twice without [`Tensor::zero_grad`] adds up.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Err(Error::Detached);
        }

        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(t.id()) {
                continue;
            }
            if let Some(op) = &t.0.op {
                stack.extend(op.inputs.iter().filter(|i| i.requires_grad()).cloned());
            }
            order.push(t);
        }
        order.sort_unstable_by_key(|t| std::cmp::Reverse(t.id()));

        let mut pending: HashMap<u64, Vec<f64>> = HashMap::new();
        pending.insert(self.id(), vec![1.0]);
        for t in &order {
            let Some(g) = pending.remove(&t.id()) else {
                continue;
            };
            match &t.0.op {
                Some(op) => {
                    let grads = (op.backward)(&g);
                    debug_assert_eq!(grads.len(), op.inputs.len(), "{}", op.name);
                    for (input, gi) in op.inputs.iter().zip(grads) {
                        let Some(gi) = gi else { continue };
                        if !input.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(gi.len(), input.numel(), "{}", op.name);
                        match pending.get_mut(&input.id()) {
                            Some(acc) => acc.iter_mut().zip(&gi).for_each(|(a, b)| *a += b),
                            None => {
                                pending.insert(input.id(), gi);
                            }
                        }
                    }
                }
                None => {
                    let mut slot = t.0.grad.borrow_mut();
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(g),
                    }
                }
            }
        }
        Ok(())
    }
}

/// Broadcast-free shape equality check shared by the elementwise ops.
pub(crate) fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}
