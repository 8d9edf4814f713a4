//! Tape-based reverse-mode differentiation.
//!
//! Every operation applied to a [`Var`] appends one node to its [`Tape`]. Nodes are
//! stored in recording order, so walking the node list backwards is a valid reverse
//! topological order and each operation is replayed exactly once.

use std::cell::{Ref, RefCell};
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{Result, TensorError};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub type VarId = usize;

/// Given the gradient of a node's output and a mask of which parents need a gradient,
/// returns one entry per parent.
pub(crate) type BackwardFn<S> = Box<dyn Fn(&Tensor<S>, &[bool]) -> Vec<Option<Tensor<S>>>>;

struct Node<S: Scalar> {
    value: Rc<Tensor<S>>,
    parents: Vec<VarId>,
    backward: Option<BackwardFn<S>>,
    needs_grad: bool,
}

/// Ordered record of the operations of one forward pass.
///
/// A tape is single-threaded and meant to be used for one training step (or one
/// inference evaluation, see [`Tape::inference`]).
pub struct Tape<S: Scalar = f32> {
    nodes: RefCell<Vec<Node<S>>>,
    params: RefCell<BTreeMap<String, VarId>>,
    recording: bool,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, S: Scalar = f32> {
    tape: &'t Tape<S>,
    id: VarId,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    /// A tape that records backward closures.
    pub fn new() -> Self {
        Self { nodes: RefCell::default(), params: RefCell::default(), recording: true }
    }

    /// A tape that only evaluates values; [`Tape::backward`] on it is an error.
    pub fn inference() -> Self {
        Self { recording: false, ..Self::new() }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf holding `value`; participates in differentiation iff `value.requires_grad()`.
    pub fn var(&self, value: Tensor<S>) -> Var<'_, S> {
        let needs_grad = self.recording && value.requires_grad();
        self.push_node(Node { value: Rc::new(value), parents: Vec::new(), backward: None, needs_grad })
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<S>) -> Var<'_, S> {
        self.var(value.with_requires_grad(false))
    }

    /// Named trainable leaf. Its gradient is reported under `name` by [`Tape::backward`].
    ///
    /// # Panics
    /// If `name` was already registered on this tape.
    pub fn param(&self, name: impl Into<String>, value: &Tensor<S>) -> Var<'_, S> {
        let name = name.into();
        let var = self.var(value.clone().with_requires_grad(true));
        let previous = self.params.borrow_mut().insert(name.clone(), var.id);
        assert!(previous.is_none(), "parameter `{name}` registered twice");
        var
    }

    /// Looks up a registered parameter by name.
    pub fn get_param(&self, name: &str) -> Result<Var<'_, S>> {
        let id = *self.params.borrow().get(name).ok_or_else(|| TensorError::UnknownParameter(name.to_owned()))?;
        Ok(Var { tape: self, id })
    }

    pub(crate) fn push_op(&self, value: Tensor<S>, parents: &[Var<'_, S>], backward: BackwardFn<S>) -> Var<'_, S> {
        let needs_grad = self.recording && {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].needs_grad)
        };
        let node = if needs_grad {
            Node {
                value: Rc::new(value),
                parents: parents.iter().map(|p| p.id).collect(),
                backward: Some(backward),
                needs_grad,
            }
        } else {
            Node { value: Rc::new(value), parents: Vec::new(), backward: None, needs_grad }
        };
        self.push_node(node)
    }

    fn push_node(&self, node: Node<S>) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var { tape: self, id: nodes.len() - 1 }
    }

    /// Gradients of a scalar `loss` with respect to every leaf that requires a gradient.
    ///
    /// Parameters that do not influence `loss` get all-zero gradients.
    pub fn backward(&self, loss: Var<'_, S>) -> Result<Gradients<S>> {
        self.backward_traced(loss, |_| {})
    }

    /// Like [`Tape::backward`], reporting each replayed operation node to `visit`.
    pub fn backward_traced(&self, loss: Var<'_, S>, mut visit: impl FnMut(VarId)) -> Result<Gradients<S>> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(TensorError::Contract("loss was recorded on a different tape".into()));
        }
        if !self.recording {
            return Err(TensorError::Contract("backward on an inference-only tape".into()));
        }
        let nodes = self.nodes.borrow();
        let loss_value = &nodes[loss.id].value;
        if !loss_value.is_scalar() {
            return Err(TensorError::Contract(format!(
                "loss must be a scalar, got shape {:?}",
                loss_value.shape()
            )));
        }

        let mut grads: Vec<Option<Tensor<S>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::ones(loss_value.shape().to_vec()));
        let mut leaf_grads = BTreeMap::new();

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(grad) = grads[id].take() else { continue };
            match &node.backward {
                None => {
                    leaf_grads.insert(id, grad);
                }
                Some(backward) => {
                    visit(id);
                    let mask: Vec<bool> = node.parents.iter().map(|&p| nodes[p].needs_grad).collect();
                    let parent_grads = backward(&grad, &mask);
                    debug_assert_eq!(parent_grads.len(), node.parents.len());
                    for ((&p, g), needed) in node.parents.iter().zip(parent_grads).zip(mask) {
                        let Some(g) = g.filter(|_| needed) else { continue };
                        match &mut grads[p] {
                            Some(acc) => acc.add_assign(&g),
                            slot => *slot = Some(g),
                        }
                    }
                }
            }
        }

        let mut by_name = BTreeMap::new();
        for (name, &id) in self.params.borrow().iter() {
            let g = leaf_grads.get(&id).cloned().unwrap_or_else(|| Tensor::zeros(nodes[id].value.shape().to_vec()));
            by_name.insert(name.clone(), g);
        }
        Ok(Gradients { by_name, by_id: leaf_grads })
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<S: Scalar = f32> {
    by_name: BTreeMap<String, Tensor<S>>,
    by_id: BTreeMap<VarId, Tensor<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.by_name.get(name)
    }

    /// Gradient of an arbitrary leaf, zero if it was not reached.
    pub fn of(&self, var: Var<'_, S>) -> Tensor<S> {
        self.by_id.get(&var.id).cloned().unwrap_or_else(|| Tensor::zeros(var.shape()))
    }

    pub fn named(&self) -> &BTreeMap<String, Tensor<S>> {
        &self.by_name
    }

    pub fn into_named(self) -> BTreeMap<String, Tensor<S>> {
        self.by_name
    }
}

impl<S: Scalar> std::fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var").field("id", &self.id).field("shape", &self.shape()).finish()
    }
}

impl<'t, S: Scalar> Var<'t, S> {
    pub fn id(&self) -> VarId {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<S> {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor<S>> {
        Ref::map(self.tape.nodes.borrow(), |n| &*n[self.id].value)
    }

    pub(crate) fn rc(&self) -> Rc<Tensor<S>> {
        Rc::clone(&self.tape.nodes.borrow()[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn to_tensor(&self) -> Tensor<S> {
        (*self.rc()).clone()
    }

    pub(crate) fn same_tape(&self, other: &Var<'_, S>, op: &'static str) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(TensorError::Contract(format!("{op}: operands live on different tapes")))
        }
    }
}
