// SPDX-License-Identifier: Apache-2.0

//! Share-level gate engines for the (2,3)-decomposition.
//!
//! Party `i` talks only to party `i+1 mod 3`: its output share of every
//! nonlinear gate depends on its own shares, the next party's shares and
//! both parties' tape bits. XOR-type gates are local. Public constants are
//! held by party 0 alone.

use sha2::{Digest, Sha256};

use super::circuit::{Gates, NONLINEAR_GATES};

pub const SEED_LEN: usize = 16;
/// Tape bytes per party: a 32-byte input share followed by one `u32` per
/// nonlinear gate.
pub const TAPE_LEN: usize = 32 + 4 * NONLINEAR_GATES;

/// Expands a seed with SHA-256 in counter mode.
pub fn expand_tape(seed: &[u8; SEED_LEN]) -> Vec<u8> {
    let mut out = Vec::with_capacity(TAPE_LEN + 32);
    let mut ctr = 0u32;
    while out.len() < TAPE_LEN {
        let mut h = Sha256::new();
        h.update(seed);
        h.update(ctr.to_le_bytes());
        out.extend_from_slice(&h.finalize());
        ctr += 1;
    }
    out.truncate(TAPE_LEN);
    out
}

fn tape_word(tape: &[u8], gate: usize) -> u32 {
    let at = 32 + 4 * gate;
    u32::from_le_bytes(tape[at..at + 4].try_into().unwrap())
}

fn bit(x: u32, i: u32) -> u32 {
    (x >> i) & 1
}

/// All three parties, as run by the prover.
pub(crate) struct Prover3<'a> {
    pub tapes: [&'a [u8]; 3],
    pub gate: usize,
    pub views: [Vec<u32>; 3],
}

impl<'a> Prover3<'a> {
    pub fn new(tapes: [&'a [u8]; 3]) -> Self {
        let view = || Vec::with_capacity(NONLINEAR_GATES);
        Self {
            tapes,
            gate: 0,
            views: [view(), view(), view()],
        }
    }

    fn rand(&self) -> [u32; 3] {
        [0, 1, 2].map(|p| tape_word(self.tapes[p], self.gate))
    }
}

impl Gates for Prover3<'_> {
    type W = [u32; 3];

    fn constant(&mut self, c: u32) -> [u32; 3] {
        [c, 0, 0]
    }

    fn xor(&mut self, a: [u32; 3], b: [u32; 3]) -> [u32; 3] {
        [a[0] ^ b[0], a[1] ^ b[1], a[2] ^ b[2]]
    }

    fn rotr(&mut self, a: [u32; 3], n: u32) -> [u32; 3] {
        a.map(|x| x.rotate_right(n))
    }

    fn shr(&mut self, a: [u32; 3], n: u32) -> [u32; 3] {
        a.map(|x| x >> n)
    }

    fn and(&mut self, x: [u32; 3], y: [u32; 3]) -> [u32; 3] {
        let r = self.rand();
        let mut z = [0u32; 3];
        for p in 0..3 {
            let q = (p + 1) % 3;
            z[p] = (x[p] & y[p]) ^ (x[q] & y[p]) ^ (x[p] & y[q]) ^ r[p] ^ r[q];
            self.views[p].push(z[p]);
        }
        self.gate += 1;
        z
    }

    fn add(&mut self, x: [u32; 3], y: [u32; 3]) -> [u32; 3] {
        let r = self.rand();
        let mut c = [0u32; 3];
        for i in 0..31 {
            let a = [0, 1, 2].map(|p| bit(x[p] ^ c[p], i));
            let b = [0, 1, 2].map(|p| bit(y[p] ^ c[p], i));
            for p in 0..3 {
                let q = (p + 1) % 3;
                let t = (a[p] & b[p]) ^ (a[q] & b[p]) ^ (a[p] & b[q]) ^ bit(r[p], i) ^ bit(r[q], i);
                c[p] |= (t ^ bit(c[p], i)) << (i + 1);
            }
        }
        for p in 0..3 {
            self.views[p].push(c[p]);
        }
        self.gate += 1;
        [0, 1, 2].map(|p| x[p] ^ y[p] ^ c[p])
    }
}

/// The two opened parties `e` (slot 0) and `e+1` (slot 1), as re-run by the
/// verifier. Slot 0 is recomputed; slot 1's nonlinear outputs are taken from
/// the proof.
pub(crate) struct Verifier2<'a> {
    pub first_party: usize,
    pub tapes: [&'a [u8]; 2],
    pub claimed: [&'a [u32]; 2],
    pub gate: usize,
    /// First gate where slot 0's claimed output disagrees with recomputation.
    pub fault: Option<usize>,
}

impl<'a> Verifier2<'a> {
    fn rand(&self) -> [u32; 2] {
        [0, 1].map(|s| tape_word(self.tapes[s], self.gate))
    }

    fn record(&mut self, recomputed: u32) -> u32 {
        if self.fault.is_none() && self.claimed[0][self.gate] != recomputed {
            self.fault = Some(self.gate);
        }
        let next = self.claimed[1][self.gate];
        self.gate += 1;
        next
    }
}

impl Gates for Verifier2<'_> {
    type W = [u32; 2];

    fn constant(&mut self, c: u32) -> [u32; 2] {
        match self.first_party {
            0 => [c, 0],
            2 => [0, c],
            _ => [0, 0],
        }
    }

    fn xor(&mut self, a: [u32; 2], b: [u32; 2]) -> [u32; 2] {
        [a[0] ^ b[0], a[1] ^ b[1]]
    }

    fn rotr(&mut self, a: [u32; 2], n: u32) -> [u32; 2] {
        a.map(|x| x.rotate_right(n))
    }

    fn shr(&mut self, a: [u32; 2], n: u32) -> [u32; 2] {
        a.map(|x| x >> n)
    }

    fn and(&mut self, x: [u32; 2], y: [u32; 2]) -> [u32; 2] {
        let r = self.rand();
        let z0 = (x[0] & y[0]) ^ (x[1] & y[0]) ^ (x[0] & y[1]) ^ r[0] ^ r[1];
        let z1 = self.record(z0);
        [z0, z1]
    }

    fn add(&mut self, x: [u32; 2], y: [u32; 2]) -> [u32; 2] {
        let r = self.rand();
        let c1 = self.claimed[1][self.gate];
        let mut c0 = 0u32;
        for i in 0..31 {
            let a0 = bit(x[0] ^ c0, i);
            let b0 = bit(y[0] ^ c0, i);
            let a1 = bit(x[1] ^ c1, i);
            let b1 = bit(y[1] ^ c1, i);
            let t = (a0 & b0) ^ (a1 & b0) ^ (a0 & b1) ^ bit(r[0], i) ^ bit(r[1], i);
            c0 |= (t ^ bit(c0, i)) << (i + 1);
        }
        self.record(c0);
        [x[0] ^ y[0] ^ c0, x[1] ^ y[1] ^ c1]
    }
}
