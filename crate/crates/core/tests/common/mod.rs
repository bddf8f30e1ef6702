#![allow(dead_code)]

pub mod bigconst;
