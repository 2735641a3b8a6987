/// Fixed-size bit set used for held-message summaries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitset {
    words: Vec<u64>,
}

impl Bitset {
    pub fn new(bits: usize) -> Self {
        Bitset { words: vec![0; bits.div_ceil(64)] }
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices set here and not in `other`, ascending.
    pub fn missing_from(&self, other: &Bitset) -> impl Iterator<Item = usize> + '_ {
        let other = other.words.clone();
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut diff = w & !other.get(wi).copied().unwrap_or(0);
            std::iter::from_fn(move || {
                if diff == 0 {
                    return None;
                }
                let b = diff.trailing_zeros() as usize;
                diff &= diff - 1;
                Some(wi * 64 + b)
            })
        })
    }
}
