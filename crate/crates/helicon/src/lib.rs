//! Tonal tension analysis for MIDI files.
//!
//! The pipeline: parse a Standard MIDI File, spell pitches onto the line of
//! fifths, embed them in the spiral array, slide a window to produce tension
//! curves (cloud diameter, cloud momentum, tensile strain), detect key and
//! key changes, and classify tracks into melody, bass, and harmony roles
//! with a random forest so a filtered MIDI file can be written back out.

pub mod classify;
pub mod config;
pub mod error;
pub mod midi;
pub mod report;
pub mod spiral;
pub mod tension;
pub mod tonal;
