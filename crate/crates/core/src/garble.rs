//! Reversible garbled tables.
//!
//! A Toffoli on input wires `(w1, w2, w3)` with outputs `(v1, v2, v3)` gets
//! two tables of 8 rows each. Forward row `(u, v, w)` is
//! `CL.Enc_{k_u^{w1}, k_v^{w2}, k_w^{w3}}(k_u^{v1} || k_v^{v2} || k_{w^uv}^{v3})`;
//! backward rows swap the roles of the two key triples. Each table is
//! shuffled independently.
//!
//! A phase gate `R_Z(+-pi/n)`, `n = 2^d`, gets two KDMP rows carrying `m0`
//! under `k0` and `m0 +- 1 (mod 2n)` under `k1`, with `m0` uniform in
//! `Z_{2n}`. Values are big-endian in `ceil((d + 1) / 8)` bytes.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::circuit::{CpCircuit, Gate};
use crate::encoding::KeySchedule;
use crate::error::{Error, Result};
use crate::oracle::{OracleMode, RandomOracle};
use crate::seed::SeedTree;
use crate::sym::{cl_enc, kdmp_enc, ClCiphertext, CryptoParams, KdmpCiphertext, SymKey};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToffoliTables {
    pub forward: Vec<ClCiphertext>,
    pub backward: Vec<ClCiphertext>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseTable {
    pub rows: Vec<KdmpCiphertext>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GateTable {
    Toffoli(ToffoliTables),
    Phase(PhaseTable),
}

/// Tables in circuit order plus the public circuit they belong to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarbledBundle {
    pub circuit: CpCircuit,
    pub params: CryptoParams,
    pub tables: Vec<GateTable>,
}

impl GarbledBundle {
    /// Check table kinds, row counts and field lengths against the circuit.
    pub fn validate(&self) -> Result<()> {
        let kb = self.params.key_bytes();
        let tb = self.params.tag_bytes();
        if self.tables.len() != self.circuit.len() {
            return Err(Error::Malformed("table count differs from gate count".into()));
        }
        let tag_ok = |t: &crate::sym::KeyTag| t.pad.len() == kb && t.hash.len() == tb;
        for (i, (g, t)) in self.circuit.gates().iter().zip(&self.tables).enumerate() {
            let ok = match (g, t) {
                (Gate::Toffoli { .. }, GateTable::Toffoli(tt)) => {
                    tt.forward.len() == 8
                        && tt.backward.len() == 8
                        && tt.forward.iter().chain(&tt.backward).all(|r| {
                            r.masked.len() == 3 * kb && r.pads.iter().all(|p| p.len() == kb) && r.tags.iter().all(tag_ok)
                        })
                }
                (Gate::Phase { denom_exp, .. }, GateTable::Phase(pt)) => {
                    pt.rows.len() == 2
                        && pt
                            .rows
                            .iter()
                            .all(|r| r.masked.len() == phase_payload_bytes(*denom_exp) && r.r1.len() == kb && tag_ok(&r.tag))
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Malformed(format!("gate {i}: table does not match gate")));
            }
        }
        Ok(())
    }
}

/// Bytes holding a value of `Z_{2n}`, `n = 2^denom_exp`.
pub fn phase_payload_bytes(denom_exp: u32) -> usize {
    (denom_exp as usize + 1).div_ceil(8).max(1)
}

pub fn encode_phase_value(m: u64, denom_exp: u32) -> Vec<u8> {
    let n = phase_payload_bytes(denom_exp);
    m.to_be_bytes()[8 - n..].to_vec()
}

pub fn decode_phase_value(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64)
}

fn concat_keys(keys: [&SymKey; 3]) -> Vec<u8> {
    keys.iter().flat_map(|k| k.as_bytes().iter().copied()).collect()
}

/// Forward and backward tables for one Toffoli.
pub fn garble_toffoli<R: RngCore + ?Sized>(
    oracle: &RandomOracle,
    params: &CryptoParams,
    inputs: [usize; 3],
    outputs: [usize; 3],
    schedule: &KeySchedule,
    rng: &mut R,
) -> Result<ToffoliTables> {
    let ins = inputs.map(|w| schedule.pair(w)).map(|p| p.cloned());
    let outs = outputs.map(|w| schedule.pair(w)).map(|p| p.cloned());
    let [i1, i2, i3] = ins;
    let [o1, o2, o3] = outs;
    let (i1, i2, i3, o1, o2, o3) = (i1?, i2?, i3?, o1?, o2?, o3?);
    let mut forward = Vec::with_capacity(8);
    let mut backward = Vec::with_capacity(8);
    for t in 0..8u8 {
        let (u, v, w) = (t & 1 == 1, t & 2 == 2, t & 4 == 4);
        let w2 = w ^ (u && v);
        let payload = concat_keys([o1.key(u), o2.key(v), o3.key(w2)]);
        forward.push(cl_enc(oracle, params, [i1.key(u), i2.key(v), i3.key(w)], &payload, rng));
        // Row indexed by the output triple (u, v, w); it maps back to w ^ uv.
        let payload = concat_keys([i1.key(u), i2.key(v), i3.key(w2)]);
        backward.push(cl_enc(oracle, params, [o1.key(u), o2.key(v), o3.key(w)], &payload, rng));
    }
    forward.shuffle(rng);
    backward.shuffle(rng);
    Ok(ToffoliTables { forward, backward })
}

/// Two shuffled rows for `R_Z(+-pi / 2^denom_exp)` on `wire`.
pub fn garble_phase<R: RngCore + ?Sized>(
    oracle: &RandomOracle,
    params: &CryptoParams,
    wire: usize,
    denom_exp: u32,
    negative: bool,
    schedule: &KeySchedule,
    rng: &mut R,
) -> Result<PhaseTable> {
    let pair = schedule.pair(wire)?;
    let modulus = 2u64 << denom_exp;
    let m0 = rng.gen_range(0..modulus);
    let m1 = if negative { (m0 + modulus - 1) % modulus } else { (m0 + 1) % modulus };
    let mut rows = vec![
        kdmp_enc(oracle, params, &pair.k0, &encode_phase_value(m0, denom_exp), rng),
        kdmp_enc(oracle, params, &pair.k1, &encode_phase_value(m1, denom_exp), rng),
    ];
    rows.shuffle(rng);
    Ok(PhaseTable { rows })
}

fn garble_gate(
    oracle: &RandomOracle,
    params: &CryptoParams,
    g: &Gate,
    schedule: &KeySchedule,
    seeds: &SeedTree,
    index: usize,
) -> Result<GateTable> {
    let mut rng = seeds.indexed("gate", index as u64).rng("tables");
    Ok(match *g {
        Gate::Toffoli { inputs, outputs } => {
            GateTable::Toffoli(garble_toffoli(oracle, params, inputs, outputs, schedule, &mut rng)?)
        }
        Gate::Phase {
            wire,
            denom_exp,
            negative,
        } => GateTable::Phase(garble_phase(oracle, params, wire, denom_exp, negative, schedule, &mut rng)?),
    })
}

/// Garble every gate of `circuit`. Gate `i` draws from its own stream
/// derived from `seeds`, so the bundle does not depend on scheduling; gates
/// are garbled in parallel unless the oracle is a lazily sampled table,
/// whose contents depend on query order.
pub fn garble_circuit(
    oracle: &RandomOracle,
    params: &CryptoParams,
    circuit: &CpCircuit,
    schedule: &KeySchedule,
    seeds: &SeedTree,
) -> Result<GarbledBundle> {
    if schedule.pairs.len() != circuit.num_wires() || schedule.kappa_bits != params.kappa_bits {
        return Err(Error::InvalidParameter("key schedule does not match circuit".into()));
    }
    let gates = circuit.gates();
    let tables: Result<Vec<GateTable>> = match oracle.mode() {
        OracleMode::HashDerived { .. } => gates
            .par_iter()
            .enumerate()
            .map(|(i, g)| garble_gate(oracle, params, g, schedule, seeds, i))
            .collect(),
        OracleMode::Table { .. } => gates
            .iter()
            .enumerate()
            .map(|(i, g)| garble_gate(oracle, params, g, schedule, seeds, i))
            .collect(),
    };
    Ok(GarbledBundle {
        circuit: circuit.clone(),
        params: *params,
        tables: tables?,
    })
}

/// Least set containing `revealed` and closed under: if every element of
/// `s` is present, add every element of `t`, for each `(s, t)` in `pairs`.
pub fn closure_of<K: Ord + Clone>(revealed: &BTreeSet<K>, pairs: &[(Vec<K>, Vec<K>)]) -> BTreeSet<K> {
    let mut set = revealed.clone();
    let mut open: Vec<bool> = vec![true; pairs.len()];
    loop {
        let mut grew = false;
        for (j, (s, t)) in pairs.iter().enumerate() {
            if open[j] && s.iter().all(|k| set.contains(k)) {
                open[j] = false;
                for k in t {
                    grew |= set.insert(k.clone());
                }
            }
        }
        if !grew {
            return set;
        }
    }
}

/// Wire-level pairs: each Toffoli links its input wires to its output wires
/// (forward table) and back (backward table). Phase gates add none.
pub fn wire_pairs(circuit: &CpCircuit) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut v = Vec::new();
    for g in circuit.gates() {
        if let Gate::Toffoli { inputs, outputs } = g {
            v.push((inputs.to_vec(), outputs.to_vec()));
            v.push((outputs.to_vec(), inputs.to_vec()));
        }
    }
    v
}

pub fn closure(revealed: &BTreeSet<usize>, circuit: &CpCircuit) -> BTreeSet<usize> {
    closure_of(revealed, &wire_pairs(circuit))
}

/// A single key: `(wire, bit)`.
pub type KeyId = (usize, bool);

/// Key-level pairs of every forward and backward Toffoli row.
pub fn key_pairs(circuit: &CpCircuit) -> Vec<(Vec<KeyId>, Vec<KeyId>)> {
    let mut v = Vec::new();
    for g in circuit.gates() {
        if let Gate::Toffoli { inputs, outputs } = g {
            for t in 0..8u8 {
                let (a, b, c) = (t & 1 == 1, t & 2 == 2, t & 4 == 4);
                let c2 = c ^ (a && b);
                v.push((
                    vec![(inputs[0], a), (inputs[1], b), (inputs[2], c)],
                    vec![(outputs[0], a), (outputs[1], b), (outputs[2], c2)],
                ));
                v.push((
                    vec![(outputs[0], a), (outputs[1], b), (outputs[2], c)],
                    vec![(inputs[0], a), (inputs[1], b), (inputs[2], c2)],
                ));
            }
        }
    }
    v
}
