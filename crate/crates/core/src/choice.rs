//! Per-player decision problem and the enumeration kernel behind the
//! likelihoods, the exact sampler and the stability checks.
//!
//! Given the information set, the potential of a choice `(links, c)` is
//! `c · a(links)` with `a(links) = θ_eff · b(d, S)`, where `d` is the
//! out-degree and `S` the lagged benefit received from the chosen
//! recipients. Enumeration therefore only needs `(d, S)` per link set.

use crate::error::{Error, Result};
use crate::game::{InfoSet, LinkSet, MpcrTable};

/// One player's choice set, with others indexed compactly by bit position.
#[derive(Clone, Debug)]
pub(crate) struct Decision {
    pub player: usize,
    pub n: usize,
    others: Vec<usize>,
    /// Lagged benefit from `others[b]`; zero unless per-sender flows are observed.
    inc: Vec<f64>,
    incoming_total: f64,
    treat: bool,
}

impl Decision {
    pub fn new(player: usize, n: usize, info: &InfoSet) -> Self {
        let others: Vec<usize> = (0..n).filter(|&j| j != player).collect();
        let inc = others.iter().map(|&j| info.from_sender(j)).collect();
        Decision {
            player,
            n,
            others,
            inc,
            incoming_total: info.incoming_total,
            treat: info.regime.is_treatment(),
        }
    }

    /// Number of link sets, `2^(n-1)`.
    pub fn mask_count(&self) -> usize {
        1 << (self.n - 1)
    }

    pub fn compact(&self, links: LinkSet) -> u32 {
        self.others
            .iter()
            .enumerate()
            .filter(|(_, &j)| links.contains(j))
            .fold(0, |acc, (b, _)| acc | 1 << b)
    }

    pub fn expand(&self, mask: u32) -> LinkSet {
        LinkSet::from_players(
            self.others
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &j)| j),
        )
    }

    pub fn inc(&self, bit: usize) -> f64 {
        self.inc[bit]
    }

    /// Out-degree and reciprocated lagged benefit of a compact mask.
    pub fn stats(&self, mask: u32) -> (usize, f64) {
        let mut s = 0.0;
        let mut bits = mask;
        while bits != 0 {
            s += self.inc[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        (mask.count_ones() as usize, s)
    }

    /// Features per unit contribution: cost, generalized, treatment ×
    /// generalized, treatment × direct.
    #[inline]
    pub fn features(&self, mpcr: &MpcrTable, d: usize, s: f64) -> [f64; 4] {
        let m = mpcr.at(d);
        let others = (self.n - 1) as f64;
        let gen = d as f64 * m * self.incoming_total / (others * others);
        let t = if self.treat { 1.0 } else { 0.0 };
        [m - 1.0, gen, t * gen, t * m * s / others]
    }

    /// Fills `(d, S)` for every compact mask in natural order.
    pub fn fill_stats(&self, d: &mut Vec<u8>, s: &mut Vec<f64>) {
        let count = self.mask_count();
        d.clear();
        s.clear();
        d.reserve(count);
        s.reserve(count);
        d.push(0);
        s.push(0.0);
        for mask in 1..count {
            let low = mask & (mask - 1);
            d.push(d[low] + 1);
            s.push(s[low] + self.inc[mask.trailing_zeros() as usize]);
        }
    }
}

#[inline]
pub(crate) fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Sums of `exp(c_k·a − shift)` and `c_k·exp(c_k·a − shift)` over the grid
/// `c_k = k/(q−1)`. Every one of the `q` terms is accumulated; the
/// exponentials are generated by a ratio recurrence from the largest term.
#[inline]
pub(crate) fn grid_sums(a: f64, q: usize, shift: f64) -> (f64, f64) {
    let steps = (q - 1) as f64;
    let ratio = (-a.abs() / steps).exp();
    let mut w = 1.0;
    let mut sum_w = 0.0;
    let mut sum_cw = 0.0;
    if a >= 0.0 {
        for k in (0..q).rev() {
            sum_w += w;
            sum_cw += k as f64 / steps * w;
            w *= ratio;
        }
    } else {
        for k in 0..q {
            sum_w += w;
            sum_cw += k as f64 / steps * w;
            w *= ratio;
        }
    }
    let scale = (a.max(0.0) - shift).exp();
    (sum_w * scale, sum_cw * scale)
}

/// Reusable per-thread buffers for full enumeration.
#[derive(Default)]
pub(crate) struct Workspace {
    pub d: Vec<u8>,
    pub s: Vec<f64>,
    pub a: Vec<f64>,
}

/// Log partition function over all `2^(n−1)·q` choices together with the
/// expected features `E[c·b]`. `coef` already includes any feature scale.
pub(crate) struct Partition {
    pub log_z: f64,
    pub expected: [f64; 4],
    pub terms: u64,
}

pub(crate) fn partition(
    decision: &Decision,
    mpcr: &MpcrTable,
    q: usize,
    coef: &[f64; 4],
    ws: &mut Workspace,
) -> Result<Partition> {
    decision.fill_stats(&mut ws.d, &mut ws.s);
    let count = decision.mask_count();
    ws.a.clear();
    let mut shift = 0.0f64;
    for mask in 0..count {
        let a = dot4(
            coef,
            &decision.features(mpcr, ws.d[mask] as usize, ws.s[mask]),
        );
        if !a.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite potential for player {} choosing links {:?}",
                decision.player,
                decision.expand(mask as u32)
            )));
        }
        shift = shift.max(a);
        ws.a.push(a);
    }
    let mut z = 0.0;
    let mut expected = [0.0; 4];
    for mask in 0..count {
        let (w, cw) = grid_sums(ws.a[mask], q, shift);
        z += w;
        let b = decision.features(mpcr, ws.d[mask] as usize, ws.s[mask]);
        for f in 0..4 {
            expected[f] += b[f] * cw;
        }
    }
    for e in &mut expected {
        *e /= z;
    }
    Ok(Partition {
        log_z: shift + z.ln(),
        expected,
        terms: (count * q) as u64,
    })
}

/// Normalized probabilities of every choice, laid out `[mask * q + level]`.
pub(crate) fn probabilities(
    decision: &Decision,
    mpcr: &MpcrTable,
    q: usize,
    coef: &[f64; 4],
    ws: &mut Workspace,
) -> Result<Vec<f64>> {
    let part = partition(decision, mpcr, q, coef, ws)?;
    let steps = (q - 1) as f64;
    let mut p = Vec::with_capacity(ws.a.len() * q);
    for &a in &ws.a {
        for k in 0..q {
            p.push((k as f64 / steps * a - part.log_z).exp());
        }
    }
    Ok(p)
}
