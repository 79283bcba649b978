//! Numerical machinery for bounding Ω(L₁(n)···L_k(n)) over admissible
//! tuples of integer linear forms: tuple normalization and singular
//! series, the J-integral family with its ν combination, Selberg-style
//! weight construction with exact small-scale identity checks, and a
//! range scanner that factors the product directly.

pub mod primes;
pub mod forms;
pub mod poly;
pub mod quad;
pub mod jint;
pub mod bounds;
pub mod weights;
pub mod scanner;
