use std::sync::Arc;

use crate::error::{Error, Result};

/// Role of an indeterminate inside a chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarClass {
    LeafBase,
    TransverseBase,
    Fiber,
    Form,
    FormalParameter,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Variable {
    pub name: String,
    pub class: VarClass,
}

/// Ordered list of named indeterminates. The order fixes the graded-lex term order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarContext {
    vars: Vec<Variable>,
}

pub type Ctx = Arc<VarContext>;

const RESERVED: &[&str] = &["i", "hbar"];

impl VarContext {
    pub fn new(vars: Vec<Variable>) -> Result<Ctx> {
        for (k, v) in vars.iter().enumerate() {
            if v.class == VarClass::Form {
                return Err(Error::Context(format!(
                    "form variable `{}` cannot enter a commutative polynomial context",
                    v.name
                )));
            }
            if !is_identifier(&v.name) || RESERVED.contains(&v.name.as_str()) {
                return Err(Error::Context(format!("invalid variable name `{}`", v.name)));
            }
            if vars[..k].iter().any(|w| w.name == v.name) {
                return Err(Error::Context(format!("duplicate variable `{}`", v.name)));
            }
        }
        Ok(Arc::new(VarContext { vars }))
    }

    /// Base context of a chart: leaf variables first, then transverse ones.
    pub fn base(leaf: &[&str], transverse: &[&str]) -> Result<Ctx> {
        let vars = leaf
            .iter()
            .map(|n| Variable { name: n.to_string(), class: VarClass::LeafBase })
            .chain(
                transverse
                    .iter()
                    .map(|n| Variable { name: n.to_string(), class: VarClass::TransverseBase }),
            )
            .collect();
        Self::new(vars)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.vars[idx].name
    }

    pub fn class(&self, idx: usize) -> VarClass {
        self.vars[idx].class
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn indices_of_class(&self, class: VarClass) -> Vec<usize> {
        (0..self.vars.len()).filter(|&k| self.vars[k].class == class).collect()
    }
}

pub(crate) fn same_ctx(a: &Ctx, b: &Ctx) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
