//! Conserved resonant sector: states with n_s' = (order - 1) * n_s.
//!
//! States pack two bits per site into a `u64`, site 0 in the most significant
//! used pair, so numeric order of codes equals lexicographic order of labels
//! (P < S < S').

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain representable in one packed word.
pub const MAX_ATOMS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum InteractionOrder {
    Two,
    Three,
    Four,
}

impl InteractionOrder {
    pub const ALL: [InteractionOrder; 3] = [Self::Two, Self::Three, Self::Four];

    pub fn value(self) -> usize {
        match self {
            Self::Two => 2,
            Self::Three => 3,
            Self::Four => 4,
        }
    }
}

impl TryFrom<u32> for InteractionOrder {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        match v {
            2 => Ok(Self::Two),
            3 => Ok(Self::Three),
            4 => Ok(Self::Four),
            _ => Err(Error::Config(format!(
                "interaction order must be 2, 3 or 4, got {v}"
            ))),
        }
    }
}

impl From<InteractionOrder> for u32 {
    fn from(o: InteractionOrder) -> u32 {
        o.value() as u32
    }
}

impl fmt::Display for InteractionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl FromStr for InteractionOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let v: u32 = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("interaction order must be an integer, got {s:?}")))?;
        Self::try_from(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    P = 0,
    S = 1,
    SPrime = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::P, Level::S, Level::SPrime];

    #[inline]
    fn from_code(c: u64) -> Level {
        match c {
            0 => Level::P,
            1 => Level::S,
            _ => Level::SPrime,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Level::P => "p",
            Level::S => "s",
            Level::SPrime => "s'",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SectorState {
    code: u64,
    len: u8,
}

impl SectorState {
    pub fn new(levels: &[Level]) -> Result<Self> {
        if levels.is_empty() || levels.len() > MAX_ATOMS {
            return Err(Error::Domain(format!(
                "state length must be in 1..={MAX_ATOMS}, got {}",
                levels.len()
            )));
        }
        let code = levels.iter().fold(0u64, |acc, &l| (acc << 2) | l as u64);
        Ok(Self {
            code,
            len: levels.len() as u8,
        })
    }

    pub fn all_p(n_atoms: usize) -> Result<Self> {
        Self::new(&vec![Level::P; n_atoms])
    }

    #[inline]
    pub(crate) fn from_code(code: u64, len: usize) -> Self {
        Self {
            code,
            len: len as u8,
        }
    }

    #[inline]
    pub fn code(&self) -> u64 {
        self.code
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn shift(&self, site: usize) -> u32 {
        2 * (self.len as u32 - 1 - site as u32)
    }

    /// Panics if `site >= len`.
    #[inline]
    pub fn level(&self, site: usize) -> Level {
        assert!(site < self.len(), "site {site} out of range");
        Level::from_code((self.code >> self.shift(site)) & 3)
    }

    #[inline]
    pub fn with_level(&self, site: usize, level: Level) -> Self {
        assert!(site < self.len(), "site {site} out of range");
        let sh = self.shift(site);
        Self {
            code: (self.code & !(3u64 << sh)) | ((level as u64) << sh),
            len: self.len,
        }
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        (0..self.len()).map(move |i| self.level(i))
    }

    pub fn count(&self, level: Level) -> usize {
        self.levels().filter(|&l| l == level).count()
    }

    pub fn s_count(&self) -> usize {
        self.count(Level::S)
    }

    pub fn in_sector(&self, order: InteractionOrder) -> bool {
        self.count(Level::SPrime) == (order.value() - 1) * self.s_count()
    }

    /// Membership check naming the conservation law on failure.
    pub fn check_sector(&self, n_atoms: usize, order: InteractionOrder) -> Result<()> {
        if self.len() != n_atoms {
            return Err(Error::Membership(format!(
                "state {self} has {} sites, sector has {n_atoms}",
                self.len()
            )));
        }
        if !self.in_sector(order) {
            return Err(Error::Membership(format!(
                "state {self} violates n_s' = {} * n_s (n_s = {}, n_s' = {})",
                order.value() - 1,
                self.s_count(),
                self.count(Level::SPrime)
            )));
        }
        Ok(())
    }
}

pub fn s_count(state: &SectorState) -> usize {
    state.s_count()
}

impl fmt::Display for SectorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.levels() {
            f.write_str(l.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for SectorState {
    type Err = Error;

    /// Accepts `p`, `s`, and `s'` (also `s′`), case-insensitive.
    fn from_str(text: &str) -> Result<Self> {
        let mut levels = Vec::new();
        let mut chars = text.trim().chars().peekable();
        while let Some(c) = chars.next() {
            match c.to_ascii_lowercase() {
                'p' => levels.push(Level::P),
                's' => {
                    if matches!(chars.peek(), Some('\'') | Some('′')) {
                        chars.next();
                        levels.push(Level::SPrime);
                    } else {
                        levels.push(Level::S);
                    }
                }
                other => {
                    return Err(Error::Domain(format!(
                        "invalid site label {other:?} in state {text:?}"
                    )))
                }
            }
        }
        SectorState::new(&levels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBudget(pub u64);

impl MemoryBudget {
    pub const GIB: u64 = 1 << 30;

    pub fn check(&self, what: &str, required_bytes: u64) -> Result<()> {
        if required_bytes > self.0 {
            return Err(Error::Resource {
                what: what.to_string(),
                required_bytes,
                budget_bytes: self.0,
            });
        }
        Ok(())
    }
}

impl Default for MemoryBudget {
    fn default() -> Self {
        MemoryBudget(16 * Self::GIB)
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn multinomial(counts: [u64; 3]) -> u128 {
    let [a, b, c] = counts;
    binomial(a + b + c, a) * binomial(b + c, b)
}

fn check_atoms(n_atoms: usize) -> Result<()> {
    if n_atoms == 0 {
        return Err(Error::Domain("n_atoms must be at least 1".into()));
    }
    if n_atoms > MAX_ATOMS {
        return Err(Error::Config(format!(
            "n_atoms must be at most {MAX_ATOMS}, got {n_atoms}"
        )));
    }
    Ok(())
}

fn block_counts(n_atoms: usize, order: InteractionOrder, k: usize) -> [u64; 3] {
    let o = order.value();
    [
        (n_atoms - o * k) as u64,
        k as u64,
        ((o - 1) * k) as u64,
    ]
}

/// Number of states in each n_s block, k = 0..=n/order.
fn block_sizes(n_atoms: usize, order: InteractionOrder) -> Vec<u128> {
    (0..=n_atoms / order.value())
        .map(|k| multinomial(block_counts(n_atoms, order, k)))
        .collect()
}

pub fn sector_dimension(n_atoms: usize, order: InteractionOrder) -> Result<u64> {
    check_atoms(n_atoms)?;
    let total: u128 = block_sizes(n_atoms, order).iter().sum();
    u64::try_from(total).map_err(|_| Error::Config("sector dimension overflows u64".into()))
}

/// Sector-averaged fraction of atoms in s.
pub fn saturation_fraction(n_atoms: usize, order: InteractionOrder) -> Result<f64> {
    check_atoms(n_atoms)?;
    let sizes = block_sizes(n_atoms, order);
    let total: u128 = sizes.iter().sum();
    let weighted: u128 = sizes.iter().enumerate().map(|(k, &m)| k as u128 * m).sum();
    Ok(weighted as f64 / total as f64 / n_atoms as f64)
}

/// Rough bytes needed to hold a basis (states plus hash index).
pub fn basis_bytes(dimension: u64) -> u64 {
    dimension.saturating_mul(48)
}

#[derive(Clone, Debug)]
pub struct SectorBasis {
    order: InteractionOrder,
    n_atoms: usize,
    states: Vec<SectorState>,
    index: HashMap<u64, usize>,
    block_offsets: Vec<usize>,
}

pub fn enumerate_sector(
    n_atoms: usize,
    order: InteractionOrder,
    budget: MemoryBudget,
) -> Result<SectorBasis> {
    let dim = sector_dimension(n_atoms, order)?;
    budget.check(&format!("sector basis of dimension {dim}"), basis_bytes(dim))?;

    let mut states = Vec::with_capacity(dim as usize);
    let mut block_offsets = Vec::new();
    for k in 0..=n_atoms / order.value() {
        block_offsets.push(states.len());
        let mut counts = block_counts(n_atoms, order, k);
        fill_block(n_atoms, &mut counts, 0, 0, &mut states);
    }
    debug_assert_eq!(states.len() as u64, dim);
    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.code, i))
        .collect();
    Ok(SectorBasis {
        order,
        n_atoms,
        states,
        index,
        block_offsets,
    })
}

fn fill_block(
    n_atoms: usize,
    counts: &mut [u64; 3],
    pos: usize,
    code: u64,
    out: &mut Vec<SectorState>,
) {
    if pos == n_atoms {
        out.push(SectorState::from_code(code, n_atoms));
        return;
    }
    for l in 0..3 {
        if counts[l] > 0 {
            counts[l] -= 1;
            fill_block(n_atoms, counts, pos + 1, (code << 2) | l as u64, out);
            counts[l] += 1;
        }
    }
}

impl SectorBasis {
    pub fn order(&self) -> InteractionOrder {
        self.order
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[SectorState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> SectorState {
        self.states[index]
    }

    #[inline]
    pub(crate) fn lookup_code(&self, code: u64) -> Option<usize> {
        self.index.get(&code).copied()
    }

    pub fn rank(&self, state: &SectorState) -> Result<usize> {
        state.check_sector(self.n_atoms, self.order)?;
        self.lookup_code(state.code)
            .ok_or_else(|| Error::Membership(format!("state {state} not found in basis")))
    }

    pub fn unrank(&self, index: usize) -> Result<SectorState> {
        self.states.get(index).copied().ok_or_else(|| {
            Error::Membership(format!(
                "index {index} outside basis of dimension {}",
                self.dim()
            ))
        })
    }

    /// Rank by counting multiset permutations; independent of the hash index.
    pub fn rank_combinatorial(&self, state: &SectorState) -> Result<usize> {
        state.check_sector(self.n_atoms, self.order)?;
        let k = state.s_count();
        let mut counts = block_counts(self.n_atoms, self.order, k);
        let mut r = self.block_offsets[k] as u128;
        for site in 0..self.n_atoms {
            let actual = state.level(site) as usize;
            for l in 0..actual {
                if counts[l] > 0 {
                    counts[l] -= 1;
                    r += multinomial(counts);
                    counts[l] += 1;
                }
            }
            counts[actual] -= 1;
        }
        Ok(r as usize)
    }

    /// Inverse of [`rank_combinatorial`](Self::rank_combinatorial).
    pub fn unrank_combinatorial(&self, index: usize) -> Result<SectorState> {
        if index >= self.dim() {
            return Err(Error::Membership(format!(
                "index {index} outside basis of dimension {}",
                self.dim()
            )));
        }
        let k = self.block_offsets.partition_point(|&o| o <= index) - 1;
        let mut r = (index - self.block_offsets[k]) as u128;
        let mut counts = block_counts(self.n_atoms, self.order, k);
        let mut code = 0u64;
        for _ in 0..self.n_atoms {
            for l in 0..3 {
                if counts[l] == 0 {
                    continue;
                }
                counts[l] -= 1;
                let m = multinomial(counts);
                if r < m {
                    code = (code << 2) | l as u64;
                    break;
                }
                r -= m;
                counts[l] += 1;
            }
        }
        Ok(SectorState::from_code(code, self.n_atoms))
    }

    /// Mean s fraction over the enumerated basis.
    pub fn saturation(&self) -> f64 {
        let total: usize = self.states.iter().map(|s| s.s_count()).sum();
        total as f64 / self.dim() as f64 / self.n_atoms as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use InteractionOrder::*;

    fn basis(n: usize, o: InteractionOrder) -> SectorBasis {
        enumerate_sector(n, o, MemoryBudget::default()).unwrap()
    }

    fn strings(b: &SectorBasis) -> Vec<String> {
        b.states().iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dimensions_match_closed_form() {
        assert_eq!(sector_dimension(12, Two).unwrap(), 73_789);
        assert_eq!(sector_dimension(13, Three).unwrap(), 93_094);
        assert_eq!(sector_dimension(14, Four).unwrap(), 108_109);
        assert_eq!(sector_dimension(3, Three).unwrap(), 4);
        assert_eq!(sector_dimension(2, Two).unwrap(), 3);
        assert!(sector_dimension(0, Two).is_err());
        assert!(InteractionOrder::try_from(5).is_err());
    }

    #[test]
    fn small_bases_in_canonical_order() {
        assert_eq!(strings(&basis(2, Two)), ["pp", "ss'", "s's"]);
        assert_eq!(strings(&basis(1, Three)), ["p"]);
        let b = basis(4, Four);
        assert_eq!(b.dim(), 5);
        assert_eq!(b.state(0).to_string(), "pppp");
        assert!(b.states()[1..].iter().all(|s| s.s_count() == 1));
    }

    #[test]
    fn round_trip_over_whole_basis() {
        let b = basis(8, Two);
        assert_eq!(b.dim(), 1107);
        for i in 0..b.dim() {
            let s = b.unrank(i).unwrap();
            assert_eq!(b.rank(&s).unwrap(), i);
            assert_eq!(b.unrank_combinatorial(i).unwrap(), s);
            assert_eq!(b.rank_combinatorial(&s).unwrap(), i);
        }
        assert!(b.unrank(b.dim()).is_err());
    }

    #[test]
    fn rejects_states_outside_sector() {
        let b = basis(3, Three);
        let bad: SectorState = "sps".parse().unwrap();
        let err = b.rank(&bad).unwrap_err();
        assert!(matches!(err, Error::Membership(ref m) if m.contains("n_s' = 2 * n_s")));
        let short: SectorState = "pp".parse().unwrap();
        assert!(b.rank(&short).is_err());
    }

    #[test]
    fn saturation_fractions() {
        let r3 = |x: f64| (x * 1000.0).round() / 1000.0;
        assert_eq!(r3(saturation_fraction(12, Two).unwrap()), 0.326);
        assert_eq!(r3(saturation_fraction(13, Three).unwrap()), 0.213);
        assert_eq!(r3(saturation_fraction(14, Four).unwrap()), 0.153);
        assert!((saturation_fraction(2, Two).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let b = basis(9, Three);
        assert!((b.saturation() - saturation_fraction(9, Three).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn budget_is_enforced() {
        let err = enumerate_sector(12, Two, MemoryBudget(1024)).unwrap_err();
        assert!(matches!(err, Error::Resource { ref what, .. } if what.contains("73789")));
    }

    #[test]
    fn parse_and_display() {
        let s: SectorState = "pSs's′".parse().unwrap();
        assert_eq!(s.to_string(), "pss's'");
        assert!("pq".parse::<SectorState>().is_err());
        assert!("".parse::<SectorState>().is_err());
    }

    proptest! {
        #[test]
        fn rank_unrank_identity(n in 1usize..=9, o in 0usize..3, seed in any::<u64>()) {
            let b = basis(n, InteractionOrder::ALL[o]);
            let i = (seed % b.dim() as u64) as usize;
            let s = b.unrank(i).unwrap();
            prop_assert_eq!(b.rank(&s).unwrap(), i);
            prop_assert_eq!(b.rank_combinatorial(&s).unwrap(), i);
        }

        #[test]
        fn ordering_is_ns_then_lexicographic(n in 2usize..=8, o in 0usize..3) {
            let b = basis(n, InteractionOrder::ALL[o]);
            for w in b.states().windows(2) {
                let key = |s: &SectorState| (s.s_count(), s.code());
                prop_assert!(key(&w[0]) < key(&w[1]));
            }
        }

        #[test]
        fn with_level_touches_one_site(n in 1usize..=12, site in 0usize..12, l in 0usize..3) {
            let site = site % n;
            let s = SectorState::all_p(n).unwrap().with_level(site, Level::ALL[l]);
            for i in 0..n {
                let want = if i == site { Level::ALL[l] } else { Level::P };
                prop_assert_eq!(s.level(i), want);
            }
        }
    }
}
