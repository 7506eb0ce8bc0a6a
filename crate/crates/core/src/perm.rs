//! Permutation inversion through cycle shortcuts.
//!
//! Only forward evaluations `π(x)` are available (each costs a probe in the
//! index). Along every cycle of length at least `max(t, 2)`, every `t`-th
//! element counted from the cycle's minimum is marked and stores the element
//! `t` steps before it. Walking forward from `q` meets a mark within `t` steps;
//! one jump back then leaves the predecessor of `q` a known number of steps
//! ahead, so `π⁻¹(q)` costs at most `max(t - 1, 1)` evaluations.

use crate::bitbuf::{ceil_log2, serialized_bitbuf_bits, BitBuf, ByteReader, ByteWriter};
use crate::bits::RsBitvector;
use crate::error::{Error, Result};

/// Back-pointer lookup used by [`invert`].
pub trait Shortcuts {
    /// The mark spacing `t`.
    fn spacing(&self) -> usize;

    /// The element `t` steps before `x` on its cycle, if `x` is marked.
    fn shortcut(&self, x: usize) -> Result<Option<usize>>;
}

/// Returns `i` with `π(i) = q`, calling `pi` at most `max(t - 1, 1)` times.
pub fn invert<S, F>(table: &S, q: usize, mut pi: F) -> Result<usize>
where
    S: Shortcuts + ?Sized,
    F: FnMut(usize) -> Result<usize>,
{
    let t = table.spacing();
    let mut x = q;
    for step in 0..t.max(1) {
        if let Some(mut y) = table.shortcut(x)? {
            // x sits `step` ahead of q, y sits `t - step` behind x's successor chain
            for _ in 0..t - 1 - step {
                y = pi(y)?;
            }
            return Ok(y);
        }
        let next = pi(x)?;
        if next == q {
            return Ok(x);
        }
        x = next;
    }
    Err(Error::Corrupt(format!(
        "no shortcut within {t} steps of {q}"
    )))
}

/// Walks every cycle of `pi` once. Returns, per element, the back-pointer
/// for marked elements.
pub(crate) fn plan_marks<F>(mut pi: F, len: usize, t: usize) -> Result<Vec<Option<u32>>>
where
    F: FnMut(usize) -> usize,
{
    if t == 0 {
        return Err(Error::InvalidParameter("shortcut spacing must be >= 1".into()));
    }
    let mut visited = vec![false; len];
    let mut marks = vec![None; len];
    let mut cycle = Vec::new();
    let next = |pi: &mut F, x: usize| -> Result<usize> {
        let y = pi(x);
        if y >= len {
            return Err(Error::MalformedPermutation(format!(
                "π({x}) = {y} outside [0, {len})"
            )));
        }
        Ok(y)
    };
    for leader in 0..len {
        if visited[leader] {
            continue;
        }
        cycle.clear();
        visited[leader] = true;
        cycle.push(leader);
        let mut x = next(&mut pi, leader)?;
        while x != leader {
            if visited[x] {
                return Err(Error::MalformedPermutation(format!(
                    "element {x} reached twice"
                )));
            }
            visited[x] = true;
            cycle.push(x);
            x = next(&mut pi, x)?;
        }
        let l = cycle.len();
        if l < t.max(2) {
            continue;
        }
        for j in (0..l).step_by(t) {
            let back = (j + l - t % l) % l;
            marks[cycle[j]] = Some(cycle[back] as u32);
        }
    }
    Ok(marks)
}

/// A standalone shortcut table over a permutation of `[0, len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortcutTable {
    len: usize,
    t: usize,
    marked: RsBitvector,
    targets: BitBuf,
}

impl ShortcutTable {
    /// Builds the table; `pi` may be evaluated freely.
    pub fn build<F: FnMut(usize) -> usize>(pi: F, len: usize, t: usize) -> Result<Self> {
        let plan = plan_marks(pi, len, t)?;
        let width = ceil_log2(len as u64);
        let mut targets = BitBuf::new();
        for back in plan.iter().flatten() {
            targets.push_bits(*back as u64, width);
        }
        Ok(Self {
            len,
            t,
            marked: RsBitvector::from_bools(plan.iter().map(Option::is_some)),
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn marked(&self) -> &RsBitvector {
        &self.marked
    }

    pub fn mark_count(&self) -> usize {
        self.marked.count_ones()
    }

    /// Width of each back-pointer, `⌈log2 len⌉`.
    pub fn target_width(&self) -> u32 {
        ceil_log2(self.len as u64)
    }

    /// Bits in the back-pointer array proper (marks × width).
    pub fn target_bits(&self) -> u64 {
        self.targets.len() as u64
    }

    /// `π⁻¹(q)`.
    pub fn invert<F: FnMut(usize) -> Result<usize>>(&self, q: usize, pi: F) -> Result<usize> {
        if q >= self.len {
            return Err(Error::OutOfRange {
                index: q,
                len: self.len,
            });
        }
        invert(self, q, pi)
    }

    /// Exact size: serialized bytes plus the marked-vector directory.
    pub fn bits(&self) -> u64 {
        128 + self.marked.size_bits() + serialized_bitbuf_bits(&self.targets)
    }

    pub fn write(&self, w: &mut ByteWriter) {
        w.u64(self.len as u64);
        w.u64(self.t as u64);
        self.marked.write(w);
        w.bitbuf(&self.targets);
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let len = r.u64()? as usize;
        let t = r.u64()? as usize;
        let marked = RsBitvector::read(r)?;
        let targets = r.bitbuf()?;
        let width = ceil_log2(len as u64) as usize;
        if t == 0
            || marked.len() != len
            || targets.len() != marked.count_ones() * width
        {
            return Err(Error::Corrupt("shortcut table shape mismatch".into()));
        }
        Ok(Self {
            len,
            t,
            marked,
            targets,
        })
    }
}

impl Shortcuts for ShortcutTable {
    fn spacing(&self) -> usize {
        self.t
    }

    fn shortcut(&self, x: usize) -> Result<Option<usize>> {
        match self.marked.get(x) {
            Some(true) => {
                let w = self.target_width();
                let r = self.marked.ones_before(x);
                Ok(Some(self.targets.get_bits(r * w as usize, w) as usize))
            }
            Some(false) => Ok(None),
            None => Err(Error::OutOfRange {
                index: x,
                len: self.len,
            }),
        }
    }
}
