use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

/// Interned-by-refcount symbol used for heads, parameters and index names.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(Arc<str>);

impl Sym {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Self {
        Sym(Arc::from(s))
    }
}

impl From<String> for Sym {
    fn from(s: String) -> Self {
        Sym(Arc::from(s))
    }
}

impl From<&Sym> for Sym {
    fn from(s: &Sym) -> Self {
        s.clone()
    }
}

impl Borrow<str> for Sym {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for Sym {
    fn eq(&self, other: &str) -> bool {
        &*self.0 == other
    }
}

/// Index position. `Lo` sorts before `Up`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variance {
    Lo,
    Up,
}

impl Variance {
    pub fn flip(self) -> Self {
        match self {
            Variance::Lo => Variance::Up,
            Variance::Up => Variance::Lo,
        }
    }
}

/// An abstract index slot: a name with explicit variance.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Index {
    pub name: Sym,
    pub var: Variance,
}

impl Index {
    pub fn new(name: impl Into<Sym>, var: Variance) -> Self {
        Index { name: name.into(), var }
    }

    pub fn lo(name: impl Into<Sym>) -> Self {
        Index::new(name, Variance::Lo)
    }

    pub fn up(name: impl Into<Sym>) -> Self {
        Index::new(name, Variance::Up)
    }

    pub fn flipped(&self) -> Self {
        Index { name: self.name.clone(), var: self.var.flip() }
    }

    pub fn with_var(&self, var: Variance) -> Self {
        Index { name: self.name.clone(), var }
    }
}

impl fmt::Debug for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.var {
            Variance::Lo => write!(f, "{}", self.name),
            Variance::Up => write!(f, "^{}", self.name),
        }
    }
}
