//! Algebraic loops made of Adder, Negator and Multiplier blocks are linear in
//! the looped signals and are solved directly, one limit at a time.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::flatten::FlatBlock;
use super::schedule::Group;
use crate::blocks::BlockSpec;
use crate::signal::StepSample;

const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoopError {
    #[error("algebraic loop through `{block}` is not linear")]
    NonlinearLoop { block: String },
    #[error("algebraic loop through {blocks:?} has no unique solution (det = {det:e})")]
    SingularLoop { blocks: Vec<String>, det: f64 },
    #[error("impulse enters algebraic loop at `{block}`")]
    ImpulseInLoop { block: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Limit {
    Left,
    Right,
}

/// Rejects loops that contain anything but Adder, Negator, and Multipliers
/// with exactly one looped input.
pub fn check_linear_loop(blocks: &[FlatBlock], group: &Group) -> Result<(), LoopError> {
    for &b in &group.blocks {
        let block = &blocks[b];
        let looped = block
            .inputs
            .iter()
            .filter(|s| group.blocks.contains(s))
            .count();
        let ok = match block.spec {
            BlockSpec::Adder { .. } | BlockSpec::Negator => true,
            BlockSpec::Multiplier { .. } => looped == 1,
            _ => false,
        };
        if !ok {
            return Err(LoopError::NonlinearLoop {
                block: block.path.clone(),
            });
        }
    }
    Ok(())
}

/// Solves the looped outputs for one limit. `known` supplies samples for
/// every signal feeding the loop from outside; entries for loop members are
/// ignored. Returns values in `group.blocks` order.
pub fn solve_linear_loop(
    blocks: &[FlatBlock],
    group: &Group,
    known: &[StepSample],
    limit: Limit,
) -> Result<Vec<f64>, LoopError> {
    check_linear_loop(blocks, group)?;
    let n = group.blocks.len();
    let pos = |s: usize| group.blocks.iter().position(|&m| m == s);
    let value = |s: usize| match limit {
        Limit::Left => known[s].left,
        Limit::Right => known[s].right,
    };

    let mut a = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for (row, &b) in group.blocks.iter().enumerate() {
        let block = &blocks[b];
        match block.spec {
            BlockSpec::Adder { .. } => {
                for &s in &block.inputs {
                    match pos(s) {
                        Some(col) => a[(row, col)] -= 1.0,
                        None => rhs[row] += value(s),
                    }
                }
            }
            BlockSpec::Negator => {
                let s = block.inputs[0];
                match pos(s) {
                    Some(col) => a[(row, col)] += 1.0,
                    None => rhs[row] = -value(s),
                }
            }
            BlockSpec::Multiplier { .. } => {
                let mut factor = 1.0;
                let mut col = None;
                for &s in &block.inputs {
                    match pos(s) {
                        Some(c) => col = Some(c),
                        None => factor *= value(s),
                    }
                }
                a[(row, col.expect("checked"))] -= factor;
            }
            _ => unreachable!("checked"),
        }
    }

    let lu = a.lu();
    let det = lu.determinant();
    if det.is_nan() || det.abs() < SINGULAR_DET {
        return Err(LoopError::SingularLoop {
            blocks: group
                .blocks
                .iter()
                .map(|&b| blocks[b].path.clone())
                .collect(),
            det,
        });
    }
    let x = lu.solve(&rhs).expect("non-singular");
    Ok(x.iter().copied().collect())
}

/// Full samples for a loop: both limits solved independently, impulses
/// forbidden.
pub(crate) fn solve_loop_samples(
    blocks: &[FlatBlock],
    group: &Group,
    known: &[StepSample],
) -> Result<Vec<StepSample>, LoopError> {
    for &b in &group.blocks {
        for &s in &blocks[b].inputs {
            if !group.blocks.contains(&s) && known[s].has_impulses() {
                return Err(LoopError::ImpulseInLoop {
                    block: blocks[b].path.clone(),
                });
            }
        }
    }
    let left = solve_linear_loop(blocks, group, known, Limit::Left)?;
    let right = solve_linear_loop(blocks, group, known, Limit::Right)?;
    Ok(left
        .into_iter()
        .zip(right)
        .map(|(l, r)| StepSample::limits(l, r))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ImpulseVector;

    fn fb(path: &str, spec: BlockSpec, inputs: Vec<usize>) -> FlatBlock {
        FlatBlock {
            path: path.into(),
            spec,
            inputs,
        }
    }

    // x = 0.5 * x + 1
    fn half_loop() -> (Vec<FlatBlock>, Group) {
        let blocks = vec![
            fb("half", BlockSpec::Constant { value: 0.5 }, vec![]),
            fb("one", BlockSpec::Constant { value: 1.0 }, vec![]),
            fb("mul", BlockSpec::Multiplier { inputs: 2 }, vec![0, 3]),
            fb("sum", BlockSpec::Adder { inputs: 2 }, vec![2, 1]),
        ];
        let group = Group {
            blocks: vec![2, 3],
            cyclic: true,
        };
        (blocks, group)
    }

    #[test]
    fn solves_half_feedback() {
        let (blocks, group) = half_loop();
        let known = vec![
            StepSample::value(0.5),
            StepSample::value(1.0),
            StepSample::default(),
            StepSample::default(),
        ];
        let x = solve_linear_loop(&blocks, &group, &known, Limit::Left).unwrap();
        assert!((x[1] - 2.0).abs() < 1e-15);
        assert!((x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn limits_are_solved_independently() {
        let (blocks, group) = half_loop();
        let known = vec![
            StepSample::value(0.5),
            StepSample::limits(1.0, 3.0),
            StepSample::default(),
            StepSample::default(),
        ];
        let s = solve_loop_samples(&blocks, &group, &known).unwrap();
        assert!((s[1].left - 2.0).abs() < 1e-15);
        assert!((s[1].right - 6.0).abs() < 1e-15);
    }

    #[test]
    fn x_equals_x_plus_one_is_singular() {
        let blocks = vec![
            fb("one", BlockSpec::Constant { value: 1.0 }, vec![]),
            fb("sum", BlockSpec::Adder { inputs: 2 }, vec![1, 0]),
        ];
        let group = Group {
            blocks: vec![1],
            cyclic: true,
        };
        let known = vec![StepSample::value(1.0), StepSample::default()];
        assert!(matches!(
            solve_linear_loop(&blocks, &group, &known, Limit::Left),
            Err(LoopError::SingularLoop { .. })
        ));
    }

    #[test]
    fn inverter_in_loop_is_nonlinear() {
        let blocks = vec![
            fb("inv", BlockSpec::Inverter, vec![1]),
            fb("neg", BlockSpec::Negator, vec![0]),
        ];
        let group = Group {
            blocks: vec![0, 1],
            cyclic: true,
        };
        assert_eq!(
            check_linear_loop(&blocks, &group),
            Err(LoopError::NonlinearLoop {
                block: "inv".into()
            })
        );
    }

    #[test]
    fn multiplier_with_two_looped_inputs_is_nonlinear() {
        let blocks = vec![fb("sq", BlockSpec::Multiplier { inputs: 2 }, vec![0, 0])];
        let group = Group {
            blocks: vec![0],
            cyclic: true,
        };
        assert!(check_linear_loop(&blocks, &group).is_err());
    }

    #[test]
    fn impulses_may_not_enter() {
        let (blocks, group) = half_loop();
        let known = vec![
            StepSample::value(0.5),
            StepSample::new(1.0, 1.0, ImpulseVector::single(0, 1.0)),
            StepSample::default(),
            StepSample::default(),
        ];
        assert_eq!(
            solve_loop_samples(&blocks, &group, &known),
            Err(LoopError::ImpulseInLoop {
                block: "sum".into()
            })
        );
    }
}
