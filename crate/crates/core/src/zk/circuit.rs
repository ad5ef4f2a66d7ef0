// SPDX-License-Identifier: Apache-2.0

//! SHA-256 compression expressed over an abstract gate set.
//!
//! The same function drives plain evaluation and both sides of the
//! MPC-in-the-head protocol, so the gate sequence cannot diverge between
//! prover and verifier. Only `and` and `add` are nonlinear; everything else
//! is computed locally on shares.

use crate::identity::{Commitment, IssuerNamespace};

pub(crate) const K: [u32; 64] = [
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5,
    0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174,
    0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967,
    0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
    0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
    0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2,
];

pub(crate) const IV: [u32; 8] = [
    0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
];

/// Number of nonlinear word gates (`and` + `add`) in one compression:
/// 64 rounds x (2 ANDs + 7 adds) + 48 x 3 schedule adds + 8 final adds.
pub const NONLINEAR_GATES: usize = 64 * 9 + 48 * 3 + 8;

pub(crate) trait Gates {
    type W: Copy;

    fn constant(&mut self, c: u32) -> Self::W;
    fn xor(&mut self, a: Self::W, b: Self::W) -> Self::W;
    fn rotr(&mut self, a: Self::W, n: u32) -> Self::W;
    fn shr(&mut self, a: Self::W, n: u32) -> Self::W;
    fn and(&mut self, a: Self::W, b: Self::W) -> Self::W;
    /// Addition mod 2^32 as a ripple-carry adder.
    fn add(&mut self, a: Self::W, b: Self::W) -> Self::W;
}

fn xor3<G: Gates>(g: &mut G, a: G::W, b: G::W, c: G::W) -> G::W {
    let t = g.xor(a, b);
    g.xor(t, c)
}

fn big_sigma<G: Gates>(g: &mut G, x: G::W, r: [u32; 3]) -> G::W {
    let a = g.rotr(x, r[0]);
    let b = g.rotr(x, r[1]);
    let c = g.rotr(x, r[2]);
    xor3(g, a, b, c)
}

fn small_sigma<G: Gates>(g: &mut G, x: G::W, r0: u32, r1: u32, s: u32) -> G::W {
    let a = g.rotr(x, r0);
    let b = g.rotr(x, r1);
    let c = g.shr(x, s);
    xor3(g, a, b, c)
}

/// One SHA-256 compression of `block` into `state`.
pub(crate) fn compress<G: Gates>(g: &mut G, state: [G::W; 8], block: [G::W; 16]) -> [G::W; 8] {
    let mut w: Vec<G::W> = block.to_vec();
    for i in 16..64 {
        let s0 = small_sigma(g, w[i - 15], 7, 18, 3);
        let s1 = small_sigma(g, w[i - 2], 17, 19, 10);
        let t = g.add(w[i - 16], s0);
        let t = g.add(t, w[i - 7]);
        w.push(g.add(t, s1));
    }

    let [mut a, mut b, mut c, mut d, mut e, mut f, mut gg, mut h] = state;
    for i in 0..64 {
        let s1 = big_sigma(g, e, [6, 11, 25]);
        // ch(e, f, g) = ((f ^ g) & e) ^ g
        let fg = g.xor(f, gg);
        let t = g.and(fg, e);
        let ch = g.xor(t, gg);
        let k = g.constant(K[i]);
        let t1 = g.add(h, s1);
        let t1 = g.add(t1, ch);
        let t1 = g.add(t1, k);
        let t1 = g.add(t1, w[i]);

        let s0 = big_sigma(g, a, [2, 13, 22]);
        // maj(a, b, c) = ((a ^ b) & (a ^ c)) ^ a
        let ab = g.xor(a, b);
        let ac = g.xor(a, c);
        let t = g.and(ab, ac);
        let maj = g.xor(t, a);
        let t2 = g.add(s0, maj);

        h = gg;
        gg = f;
        f = e;
        e = g.add(d, t1);
        d = c;
        c = b;
        b = a;
        a = g.add(t1, t2);
    }

    let mut out = state;
    for (o, v) in out.iter_mut().zip([a, b, c, d, e, f, gg, h]) {
        *o = g.add(*o, v);
    }
    out
}

/// Plain evaluation on `u32` words. The adder is the same ripple-carry
/// construction the MPC engines use, evaluated in the clear.
pub(crate) struct Plain;

/// Carry word of `x + y`: bit `i+1` holds `maj(x_i, y_i, c_i)` computed as
/// `((x_i ^ c_i) & (y_i ^ c_i)) ^ c_i`.
pub(crate) fn ripple_carries(x: u32, y: u32) -> u32 {
    let mut c = 0u32;
    for i in 0..31 {
        let a = ((x ^ c) >> i) & 1;
        let b = ((y ^ c) >> i) & 1;
        let ci = (c >> i) & 1;
        c |= ((a & b) ^ ci) << (i + 1);
    }
    c
}

impl Gates for Plain {
    type W = u32;

    fn constant(&mut self, c: u32) -> u32 {
        c
    }

    fn xor(&mut self, a: u32, b: u32) -> u32 {
        a ^ b
    }

    fn rotr(&mut self, a: u32, n: u32) -> u32 {
        a.rotate_right(n)
    }

    fn shr(&mut self, a: u32, n: u32) -> u32 {
        a >> n
    }

    fn and(&mut self, a: u32, b: u32) -> u32 {
        a & b
    }

    fn add(&mut self, a: u32, b: u32) -> u32 {
        a ^ b ^ ripple_carries(a, b)
    }
}

/// The padded 16-word block for the 40-byte message `namespace || h`, with
/// the secret words 2..10 left zero.
pub(crate) fn public_block_words(ns: &IssuerNamespace) -> [u32; 16] {
    let n = ns.as_bytes();
    let mut block = [0u32; 16];
    block[0] = u32::from_be_bytes([n[0], n[1], n[2], n[3]]);
    block[1] = u32::from_be_bytes([n[4], n[5], n[6], n[7]]);
    block[10] = 0x8000_0000;
    block[15] = 40 * 8;
    block
}

pub(crate) fn words_be(bytes: &[u8; 32]) -> [u32; 8] {
    let mut out = [0u32; 8];
    for (o, c) in out.iter_mut().zip(bytes.chunks_exact(4)) {
        *o = u32::from_be_bytes(c.try_into().unwrap());
    }
    out
}

pub(crate) fn bytes_be(words: &[u32; 8]) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (c, w) in out.chunks_exact_mut(4).zip(words) {
        c.copy_from_slice(&w.to_be_bytes());
    }
    out
}

/// SHA-256 of `namespace || h`, computed gate by gate.
pub fn circuit_eval(ns: &IssuerNamespace, h: &Commitment) -> [u8; 32] {
    let mut block = public_block_words(ns);
    block[2..10].copy_from_slice(&words_be(h.as_bytes()));
    let out = compress(&mut Plain, IV, block);
    bytes_be(&out)
}

/// SHA-256 of a message short enough for a single padded block.
pub fn sha256_single_block(msg: &[u8]) -> Option<[u8; 32]> {
    if msg.len() > 55 {
        return None;
    }
    let mut padded = [0u8; 64];
    padded[..msg.len()].copy_from_slice(msg);
    padded[msg.len()] = 0x80;
    padded[56..].copy_from_slice(&(msg.len() as u64 * 8).to_be_bytes());
    let mut block = [0u32; 16];
    for (w, c) in block.iter_mut().zip(padded.chunks_exact(4)) {
        *w = u32::from_be_bytes(c.try_into().unwrap());
    }
    Some(bytes_be(&compress(&mut Plain, IV, block)))
}
