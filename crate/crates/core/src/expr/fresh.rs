use std::collections::BTreeSet;

use super::Sym;

/// Generator of index names that avoid a reserved set.
#[derive(Clone, Debug, Default)]
pub struct Fresh {
    used: BTreeSet<Sym>,
    next: u64,
}

impl Fresh {
    pub fn new() -> Self {
        Fresh::default()
    }

    pub fn avoiding<'a>(names: impl IntoIterator<Item = &'a Sym>) -> Self {
        let mut f = Fresh::new();
        f.reserve(names);
        f
    }

    pub fn reserve<'a>(&mut self, names: impl IntoIterator<Item = &'a Sym>) {
        self.used.extend(names.into_iter().cloned());
    }

    pub fn reserve_one(&mut self, name: &Sym) {
        self.used.insert(name.clone());
    }

    pub fn is_used(&self, name: &Sym) -> bool {
        self.used.contains(name)
    }

    /// A new name of the form `_tN`, never handed out twice.
    pub fn name(&mut self) -> Sym {
        loop {
            let s = Sym::from(format!("_t{}", self.next));
            self.next += 1;
            if self.used.insert(s.clone()) {
                return s;
            }
        }
    }
}
