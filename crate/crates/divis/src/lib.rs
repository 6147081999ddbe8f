//! Desk-scale simulator and batch RL harness for collision-free visual
//! goal reaching: a 2D continuous world, synthetic egocentric
//! observation maps, dense multi-step Monte Carlo rollouts and a small
//! recurrent convolutional Q-network, with an evaluation harness for
//! the full policy ladder.

pub mod geom;
pub mod worldgen;
pub mod dynamics;
pub mod perception;
pub mod nn;
pub mod qpolicy;
pub mod rollouts;
pub mod training;
pub mod evalharness;
pub mod cli;
