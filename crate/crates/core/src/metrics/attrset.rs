use std::fmt;

use serde::de::{self, SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::AttributeId;

/// A subset of the five formal attributes, stored as a bitmask.
///
/// Iteration and serialization follow the canonical attribute order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct AttrSet(u8);

const FULL: u8 = 0b1_1111;

impl AttrSet {
    pub const fn empty() -> Self {
        AttrSet(0)
    }

    pub const fn all() -> Self {
        AttrSet(FULL)
    }

    /// Set from a bitmask where bit `i` is the `i`-th attribute in canonical order.
    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits & !FULL == 0).then_some(AttrSet(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    /// All 32 subsets, in bitmask order.
    pub fn every() -> impl Iterator<Item = AttrSet> {
        (0..=FULL).map(AttrSet)
    }

    pub fn insert(&mut self, a: AttributeId) {
        self.0 |= 1 << a.index();
    }

    pub fn remove(&mut self, a: AttributeId) {
        self.0 &= !(1 << a.index());
    }

    pub fn contains(self, a: AttributeId) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersection(self, other: AttrSet) -> AttrSet {
        AttrSet(self.0 & other.0)
    }

    pub fn union(self, other: AttrSet) -> AttrSet {
        AttrSet(self.0 | other.0)
    }

    pub fn difference(self, other: AttrSet) -> AttrSet {
        AttrSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: AttrSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = AttributeId> {
        AttributeId::ALL.into_iter().filter(move |&a| self.contains(a))
    }

    pub fn names(self) -> Vec<&'static str> {
        self.iter().map(AttributeId::name).collect()
    }
}

impl FromIterator<AttributeId> for AttrSet {
    fn from_iter<I: IntoIterator<Item = AttributeId>>(iter: I) -> Self {
        let mut s = AttrSet::empty();
        for a in iter {
            s.insert(a);
        }
        s
    }
}

impl fmt::Debug for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.names().join(", "))
    }
}

impl Serialize for AttrSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for a in self.iter() {
            seq.serialize_element(&a)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for AttrSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = AttrSet;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of distinct attribute names")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<AttrSet, A::Error> {
                let mut out = AttrSet::empty();
                while let Some(a) = seq.next_element::<AttributeId>()? {
                    if out.contains(a) {
                        return Err(de::Error::custom(format!("duplicate attribute \"{a}\"")));
                    }
                    out.insert(a);
                }
                Ok(out)
            }
        }
        deserializer.deserialize_seq(V)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use AttributeId::*;

    #[test]
    fn set_operations() {
        let a: AttrSet = [Color, Line].into_iter().collect();
        let b: AttrSet = [Line, Light].into_iter().collect();
        assert_eq!(a.intersection(b), [Line].into_iter().collect());
        assert_eq!(a.union(b).len(), 3);
        assert_eq!(a.difference(b), [Color].into_iter().collect());
        assert!(AttrSet::empty().is_subset(a));
        assert_eq!(AttrSet::every().count(), 32);
        assert!(AttrSet::from_bits(0b10_0000).is_none());
    }

    #[test]
    fn serializes_in_canonical_order() {
        let s: AttrSet = [Brushstroke, Color, Light].into_iter().collect();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"["color","light","brushstroke"]"#);
        assert_eq!(serde_json::from_str::<AttrSet>(&json).unwrap(), s);
        assert!(serde_json::from_str::<AttrSet>(r#"["color","color"]"#).is_err());
        assert_eq!(s.to_string(), "{color, light, brushstroke}");
    }
}
