//! Gray-mapped square QAM with unit average symbol energy.

use crate::{Error, Result, C64};

/// `Q²`-point square QAM over the odd-integer levels `−Q+1, …, −1, 1, …, Q−1`
/// per axis, scaled by `γ` so that the average symbol energy is one.
///
/// Symbol indices run `idx = a·Q + b`, where `a` and `b` are the ascending
/// level indices of the I and Q axes; level index `j` is level `2j − Q + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QamSpec {
    /// Levels per axis.
    pub q: u32,
    /// Amplitude scale, `γ² = 3 / (2(Q² − 1))`.
    pub gamma: f64,
}

impl QamSpec {
    pub fn new(q: u32) -> Result<Self> {
        if q < 2 || !q.is_power_of_two() || q > (1 << 15) {
            return Err(Error::Config(format!(
                "QAM side {q} must be a power of two in 2..=32768"
            )));
        }
        let qf = q as f64;
        Ok(QamSpec {
            q,
            gamma: (3.0 / (2.0 * (qf * qf - 1.0))).sqrt(),
        })
    }

    /// Square QAM carrying `bits` bits per symbol (`bits` even, ≥ 2).
    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits < 2 || !bits.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "square QAM needs an even number of bits per symbol, got {bits}"
            )));
        }
        Self::new(1 << (bits / 2))
    }

    pub fn bits_per_axis(&self) -> u32 {
        self.q.trailing_zeros()
    }

    pub fn bits_per_symbol(&self) -> u32 {
        2 * self.bits_per_axis()
    }

    /// Alphabet size `Q²`.
    pub fn size(&self) -> usize {
        (self.q as usize) * (self.q as usize)
    }

    /// Largest level magnitude, `Q − 1`.
    pub fn max_level(&self) -> i32 {
        self.q as i32 - 1
    }

    /// Odd-integer level of ascending level index `j`.
    #[inline]
    pub fn level(&self, j: u32) -> i32 {
        2 * j as i32 - self.max_level()
    }

    /// Ascending level index of odd level `v` (clamped to the alphabet).
    #[inline]
    pub fn level_index(&self, v: i32) -> u32 {
        let v = v.clamp(-self.max_level(), self.max_level());
        ((v + self.max_level()) / 2) as u32
    }

    /// Unscaled symbol (odd-integer coordinates) of index `idx`.
    #[inline]
    pub fn lattice_point(&self, idx: usize) -> C64 {
        let q = self.q as usize;
        C64::new(
            self.level((idx / q) as u32) as f64,
            self.level((idx % q) as u32) as f64,
        )
    }

    /// Unit-energy symbol of index `idx`.
    #[inline]
    pub fn symbol(&self, idx: usize) -> C64 {
        self.lattice_point(idx) * self.gamma
    }

    pub fn index_of_levels(&self, level_i: i32, level_q: i32) -> usize {
        self.level_index(level_i) as usize * self.q as usize + self.level_index(level_q) as usize
    }

    /// All symbols in index order.
    pub fn alphabet(&self) -> Vec<C64> {
        (0..self.size()).map(|i| self.symbol(i)).collect()
    }

    /// Nearest level index to a coordinate given in unscaled level units.
    #[inline]
    pub fn slice_axis(&self, x: f64) -> u32 {
        let j = ((x + self.max_level() as f64) / 2.0).round();
        j.clamp(0.0, (self.q - 1) as f64) as u32
    }

    /// Index of the alphabet point nearest to a unit-energy-domain sample.
    pub fn slice(&self, s: C64) -> usize {
        let x = s / self.gamma;
        self.slice_axis(x.re) as usize * self.q as usize + self.slice_axis(x.im) as usize
    }

    fn axis_from_gray(&self, g: u32) -> u32 {
        let mut n = g;
        let mut shift = g >> 1;
        while shift != 0 {
            n ^= shift;
            shift >>= 1;
        }
        // Gray rank 0 sits on the top level.
        self.q - 1 - n
    }

    fn gray_from_axis(&self, j: u32) -> u32 {
        let n = self.q - 1 - j;
        n ^ (n >> 1)
    }

    /// Symbol index carrying `bits`: the first half selects the I level and
    /// the second half the Q level, each through a reflected binary Gray code.
    pub fn gray_index(&self, bits: &[bool]) -> Result<usize> {
        let m = self.bits_per_axis() as usize;
        if bits.len() != 2 * m {
            return Err(Error::dim("gray_map", 2 * m, bits.len()));
        }
        let word = |b: &[bool]| b.iter().fold(0u32, |acc, &x| (acc << 1) | x as u32);
        let a = self.axis_from_gray(word(&bits[..m]));
        let b = self.axis_from_gray(word(&bits[m..]));
        Ok(a as usize * self.q as usize + b as usize)
    }

    pub fn gray_map(&self, bits: &[bool]) -> Result<C64> {
        Ok(self.symbol(self.gray_index(bits)?))
    }

    /// Bits labelling symbol index `idx`.
    pub fn gray_bits(&self, idx: usize) -> Vec<bool> {
        let m = self.bits_per_axis();
        let q = self.q as usize;
        let mut out = Vec::with_capacity(2 * m as usize);
        for j in [(idx / q) as u32, (idx % q) as u32] {
            let g = self.gray_from_axis(j);
            for b in (0..m).rev() {
                out.push((g >> b) & 1 == 1);
            }
        }
        out
    }

    /// Bits of the alphabet point nearest to `symbol`.
    pub fn gray_demap(&self, symbol: C64) -> Vec<bool> {
        self.gray_bits(self.slice(symbol))
    }
}
