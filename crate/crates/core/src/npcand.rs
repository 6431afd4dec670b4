//! Candidate proof system for NP with idealized primitives (placeholder).
