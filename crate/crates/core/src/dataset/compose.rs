use super::{digit_group, CanvasGeometry, CompositeSample, DigitImage};
use crate::error::{Error, Result};
use crate::tensor::SeededRng;

/// Indices of a digit pool split by feature-task group.
#[derive(Debug, Clone)]
pub struct GroupedPool {
    groups: [Vec<u32>; 2],
}

impl GroupedPool {
    pub fn new(pool: &[DigitImage]) -> Result<Self> {
        let mut groups = [Vec::new(), Vec::new()];
        for (i, d) in pool.iter().enumerate() {
            groups[digit_group(d.label())].push(i as u32);
        }
        Ok(Self { groups })
    }

    pub fn group(&self, g: usize) -> &[u32] {
        &self.groups[g]
    }
}

fn empty_canvas(geometry: CanvasGeometry) -> Vec<u8> {
    vec![0; geometry.pixels()]
}

/// `k` distinct digits in slots `0..k`; the cue names a uniformly drawn slot.
pub fn compose_spatial(pool: &[DigitImage], geometry: CanvasGeometry, rng: &mut SeededRng) -> Result<CompositeSample> {
    let k = geometry.slots();
    if pool.len() < k {
        return Err(Error::invalid(format!(
            "pool of {} digits cannot fill {k} slots",
            pool.len()
        )));
    }
    let mut sources: Vec<u32> = Vec::with_capacity(k);
    while sources.len() < k {
        let pick = rng.below(pool.len()) as u32;
        if !sources.contains(&pick) {
            sources.push(pick);
        }
    }
    let target_slot = rng.below(k);
    let mut pixels = empty_canvas(geometry);
    let mut slot_labels = Vec::with_capacity(k);
    for (slot, &src) in sources.iter().enumerate() {
        let digit = &pool[src as usize];
        geometry.paste(&mut pixels, digit, slot);
        slot_labels.push(Some(digit.label()));
    }
    let mut signal = vec![0.0; k];
    signal[target_slot] = 1.0;
    Ok(CompositeSample {
        geometry,
        pixels,
        signal,
        target: slot_labels[target_slot].expect("occupied slot"),
        slot_labels,
        sources,
    })
}

/// One digit from each group in random left/right order; the cue names a
/// group and the target is that group's digit wherever it sits.
pub fn compose_feature(grouped: &GroupedPool, pool: &[DigitImage], rng: &mut SeededRng) -> Result<CompositeSample> {
    let geometry = CanvasGeometry::new(2)?;
    if grouped.group(0).is_empty() || grouped.group(1).is_empty() {
        return Err(Error::invalid("feature task needs digits from both groups in the pool"));
    }
    let picks = [
        grouped.group(0)[rng.below(grouped.group(0).len())],
        grouped.group(1)[rng.below(grouped.group(1).len())],
    ];
    let group0_left = rng.below(2) == 0;
    let cued_group = rng.below(2);
    let order = if group0_left {
        [picks[0], picks[1]]
    } else {
        [picks[1], picks[0]]
    };

    let mut pixels = empty_canvas(geometry);
    let mut slot_labels = Vec::with_capacity(2);
    for (slot, &src) in order.iter().enumerate() {
        let digit = &pool[src as usize];
        geometry.paste(&mut pixels, digit, slot);
        slot_labels.push(Some(digit.label()));
    }
    let mut signal = vec![0.0; 2];
    signal[cued_group] = 1.0;
    Ok(CompositeSample {
        geometry,
        pixels,
        signal,
        target: pool[picks[cued_group] as usize].label(),
        slot_labels,
        sources: order.to_vec(),
    })
}

/// Digit `index mod pool size` in a uniformly drawn slot, other slots blank.
pub fn compose_pretrain(
    pool: &[DigitImage],
    geometry: CanvasGeometry,
    index: usize,
    rng: &mut SeededRng,
) -> Result<CompositeSample> {
    if pool.is_empty() {
        return Err(Error::invalid("empty digit pool"));
    }
    let src = index % pool.len();
    let digit = &pool[src];
    let slot = rng.below(geometry.slots());
    let mut pixels = empty_canvas(geometry);
    geometry.paste(&mut pixels, digit, slot);
    let mut slot_labels = vec![None; geometry.slots()];
    slot_labels[slot] = Some(digit.label());
    Ok(CompositeSample {
        geometry,
        pixels,
        signal: Vec::new(),
        target: digit.label(),
        slot_labels,
        sources: vec![src as u32],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Digit `label` whose pixels are all `label * 20 + 1`, so the slot a
    /// digit landed in can be read back from the canvas.
    fn digit(label: u8) -> DigitImage {
        DigitImage::new(28, 28, vec![label * 20 + 1; 784], label).unwrap()
    }

    fn slot_value(s: &CompositeSample, slot: usize) -> u8 {
        s.pixels[s.geometry.slot_columns(slot).start]
    }

    #[test]
    fn spatial_pair_targets_follow_the_cue() {
        let pool = vec![digit(3), digit(8)];
        let g = CanvasGeometry::new(2).unwrap();
        let mut seen = [false; 2];
        for i in 0..64 {
            let mut rng = SeededRng::for_stream(1, i);
            let s = compose_spatial(&pool, g, &mut rng).unwrap();
            let cue = s.signal_index().unwrap();
            assert_eq!(Some(s.target), s.slot_labels[cue]);
            if s.slot_labels == [Some(3), Some(8)] {
                // left cue -> 3, right cue -> 8
                assert_eq!(s.target, [3, 8][cue]);
                seen[cue] = true;
            }
            for slot in 0..2 {
                assert_eq!(slot_value(&s, slot), s.slot_labels[slot].unwrap() * 20 + 1);
            }
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn spatial_is_deterministic_per_stream() {
        let pool: Vec<_> = (0..10).map(digit).collect();
        let g = CanvasGeometry::new(3).unwrap();
        let a = compose_spatial(&pool, g, &mut SeededRng::for_stream(42, 0)).unwrap();
        let b = compose_spatial(&pool, g, &mut SeededRng::for_stream(42, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sources.len(), 3);
        let mut uniq = a.sources.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 3);
    }

    #[test]
    fn feature_pair_six_and_zero() {
        let pool = vec![digit(6), digit(0)];
        let grouped = GroupedPool::new(&pool).unwrap();
        let mut seen = [false; 2];
        for i in 0..64 {
            let s = compose_feature(&grouped, &pool, &mut SeededRng::for_stream(5, i)).unwrap();
            let cue = s.signal_index().unwrap();
            // group 1 (0..=4) cue -> 0, group 2 (5..=9) cue -> 6
            assert_eq!(s.target, [0, 6][cue]);
            seen[cue] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn feature_pool_without_a_group_is_rejected() {
        let pool = vec![digit(1), digit(2)];
        let grouped = GroupedPool::new(&pool).unwrap();
        assert!(compose_feature(&grouped, &pool, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn pretrain_leaves_other_slots_blank() {
        let pool = vec![digit(7)];
        let g = CanvasGeometry::new(2).unwrap();
        for i in 0..32 {
            let s = compose_pretrain(&pool, g, i, &mut SeededRng::for_stream(9, i as u64)).unwrap();
            let slot = s.slot_labels.iter().position(Option::is_some).unwrap();
            assert_eq!(s.target, 7);
            for other in (0..2).filter(|&o| o != slot) {
                let cols = g.slot_columns(other);
                for r in 0..28 {
                    assert!(s.pixels[r * g.width() + cols.start..r * g.width() + cols.end]
                        .iter()
                        .all(|&p| p == 0));
                }
            }
            if slot == 0 {
                // digit 7 in slot 0 -> columns 28..56 all zero
                assert!((0..28).all(|r| s.pixels[r * 56 + 28..r * 56 + 56].iter().all(|&p| p == 0)));
            }
        }
    }
}
