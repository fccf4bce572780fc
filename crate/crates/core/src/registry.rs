//! Head declarations: rank, slot symmetry and kind.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expr::Sym;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    None,
    Symmetric,
    Antisymmetric,
}

/// Slots `from..` are pairwise (anti)symmetric; earlier slots are fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotSymmetry {
    pub from: usize,
    pub sym: Symmetry,
}

impl SlotSymmetry {
    pub const NONE: SlotSymmetry = SlotSymmetry { from: 0, sym: Symmetry::None };

    pub fn whole(sym: Symmetry) -> Self {
        SlotSymmetry { from: 0, sym }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Dynamical,
    Metric,
    GaugeParameter,
    Constant,
    Builtin,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadInfo {
    pub rank: usize,
    pub sym: SlotSymmetry,
    pub kind: FieldKind,
}

pub const ETA: &str = "eta";
pub const DELTA: &str = "delta";
pub const G: &str = "g";
pub const GINV: &str = "ginv";
pub const SQRTG: &str = "sqrtg";
pub const GAMMA: &str = "Gamma";

/// Heads whose presence switches a term to curved contraction rules.
pub fn is_metric_head(h: &str) -> bool {
    matches!(h, G | GINV | SQRTG | GAMMA)
}

#[derive(Clone, Debug)]
pub struct Registry {
    heads: BTreeMap<Sym, HeadInfo>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::standard()
    }
}

impl Registry {
    /// Built-in heads only.
    pub fn builtin() -> Self {
        let mut r = Registry { heads: BTreeMap::new() };
        let sym2 = SlotSymmetry::whole(Symmetry::Symmetric);
        r.insert(ETA, 2, sym2, FieldKind::Builtin);
        r.insert(DELTA, 2, SlotSymmetry::NONE, FieldKind::Builtin);
        r.insert(G, 2, sym2, FieldKind::Metric);
        r.insert(GINV, 2, sym2, FieldKind::Metric);
        r.insert(SQRTG, 0, SlotSymmetry::NONE, FieldKind::Metric);
        r.insert(GAMMA, 3, SlotSymmetry { from: 1, sym: Symmetry::Symmetric }, FieldKind::Metric);
        r
    }

    /// Built-ins plus the fields used throughout: `h`, `A`, `phi`, `xi`.
    pub fn standard() -> Self {
        let mut r = Registry::builtin();
        r.insert("h", 2, SlotSymmetry::whole(Symmetry::Symmetric), FieldKind::Dynamical);
        r.insert("A", 1, SlotSymmetry::NONE, FieldKind::Dynamical);
        r.insert("phi", 0, SlotSymmetry::NONE, FieldKind::Dynamical);
        r.insert("xi", 1, SlotSymmetry::NONE, FieldKind::GaugeParameter);
        r
    }

    pub fn insert(&mut self, name: &str, rank: usize, sym: SlotSymmetry, kind: FieldKind) {
        self.heads.insert(Sym::from(name), HeadInfo { rank, sym, kind });
    }

    pub fn get(&self, name: &str) -> Option<&HeadInfo> {
        self.heads.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.heads.contains_key(name)
    }

    pub fn symmetry(&self, name: &str) -> SlotSymmetry {
        self.heads.get(name).map(|h| h.sym).unwrap_or(SlotSymmetry::NONE)
    }

    pub fn heads(&self) -> impl Iterator<Item = (&Sym, &HeadInfo)> {
        self.heads.iter()
    }

    pub fn dynamical_fields(&self) -> Vec<Sym> {
        self.heads
            .iter()
            .filter(|(_, h)| h.kind == FieldKind::Dynamical)
            .map(|(n, _)| n.clone())
            .collect()
    }
}
