use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::Rational;
use crate::report::{Mode, RiskReport};
use crate::tree::Language;

use super::compile::{GridBehavior, Phase};

/// Distribution of cascade depth over the paths of an exactly assessed
/// grid: a path's depth is the number of cycles that brought a new edge
/// failure when some edge had already failed before.
pub fn cascade_depth(report: &RiskReport, language: &Language<'_, GridBehavior>) -> Result<BTreeMap<usize, Rational>> {
    if report.mode != Mode::Exact {
        return Err(Error::ModeMismatch {
            expected: Mode::Exact.to_string(),
            found: report.mode.to_string(),
        });
    }
    let mut histogram: BTreeMap<usize, Rational> = BTreeMap::new();
    for leaf in language.leaves() {
        let path = language.path_to(leaf);
        let mut prior = !path.initial.failed().is_empty();
        let mut depth = 0;
        let mut from = &path.initial;
        for element in &path.elements {
            let to = &element.state;
            let fresh = to.failed().len() > from.failed().len();
            if fresh {
                if from.phase() == Phase::Operating && element.events.is_empty() && prior {
                    depth += 1;
                }
                prior = true;
            }
            from = to;
        }
        let mass = histogram.entry(depth).or_insert_with(Rational::zero);
        *mass += language.node(leaf).reach();
    }
    Ok(histogram)
}
