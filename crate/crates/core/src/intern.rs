//! Constant interning.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::term::Constant;

/// Stable identifier of an interned constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstId(u32);

impl ConstId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Every constant known to an evaluation, in first-seen order. Grows
/// monotonically; identifiers are never reused.
#[derive(Debug, Clone, Default)]
pub struct ConstantRegistry {
    values: Vec<Constant>,
    ids: BTreeMap<Constant, ConstId>,
}

impl ConstantRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, c: &Constant) -> ConstId {
        if let Some(id) = self.ids.get(c) {
            return *id;
        }
        let id = ConstId(u32::try_from(self.values.len()).expect("fewer than 2^32 constants"));
        self.values.push(c.clone());
        self.ids.insert(c.clone(), id);
        id
    }

    pub fn lookup(&self, c: &Constant) -> Option<ConstId> {
        self.ids.get(c).copied()
    }

    pub fn get(&self, id: ConstId) -> &Constant {
        &self.values[id.index()]
    }

    pub fn contains(&self, c: &Constant) -> bool {
        self.ids.contains_key(c)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConstId, &Constant)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, c)| (ConstId(i as u32), c))
    }
}

pub fn intern_constant(constants: &mut ConstantRegistry, c: &Constant) -> ConstId {
    constants.intern(c)
}
