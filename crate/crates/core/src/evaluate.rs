//! Server-side evaluation of a garbled bundle on an encoded state.
//!
//! Every gate acts on the sparse state as a basis permutation (Toffoli) or a
//! diagonal phase, so evaluation never creates new terms. The evaluator
//! only sees the bundle and the encoded state; it finds table rows by
//! checking key tags.
//!
//! Toffoli step, per basis term with input keys `k_in`:
//!
//! ```text
//! |k_in>|0> -> |k_in>|k_out>        forward table
//!           -> |k_in ^ k_in>|k_out> backward table, must give |0>|k_out>
//! ```
//!
//! after which the input registers are dropped.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::Gate;
use crate::encoding::wire_register;
use crate::error::{Error, Result};
use crate::garble::{decode_phase_value, phase_payload_bytes, GarbledBundle, GateTable, PhaseTable, ToffoliTables};
use crate::oracle::RandomOracle;
use crate::sim::{RegisterLayout, SparseState};
use crate::sym::{cl_dec, cl_ver, kdmp_dec, kdmp_ver, ClCiphertext, CryptoParams, SymKey};

const SCRATCH: &str = "phase-scratch";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalStats {
    pub gates: u64,
    pub toffolis: u64,
    pub phases: u64,
    pub terms: u64,
    pub rows_tried: u64,
    pub ver_calls: u64,
    pub memo_hits: u64,
    /// Input registers checked to be zero before removal.
    pub zero_checks: u64,
    pub max_terms: u64,
}

impl EvalStats {
    /// One JSON object on one line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

fn split_keys(payload: &[u8], kb: usize) -> [SymKey; 3] {
    std::array::from_fn(|i| SymKey(payload[i * kb..(i + 1) * kb].to_vec()))
}

/// The unique row of `rows` whose three tags accept `keys`.
fn find_row<'a>(
    oracle: &RandomOracle,
    params: &CryptoParams,
    rows: &'a [ClCiphertext],
    keys: [&SymKey; 3],
    gate: usize,
    stats: &mut EvalStats,
) -> Result<&'a ClCiphertext> {
    let mut hit = None;
    for row in rows {
        stats.rows_tried += 1;
        let mut ok = true;
        for (i, k) in keys.iter().enumerate() {
            stats.ver_calls += 1;
            if !cl_ver(oracle, params, k, i, row) {
                ok = false;
                break;
            }
        }
        if ok {
            if hit.is_some() {
                return Err(Error::AmbiguousRow { gate });
            }
            hit = Some(row);
        }
    }
    hit.ok_or(Error::NoRowMatch { gate })
}

/// Output keys for one input triple; checks that the backward table maps
/// them back to the same input triple.
pub fn eval_toffoli_term(
    oracle: &RandomOracle,
    params: &CryptoParams,
    tables: &ToffoliTables,
    input: [&SymKey; 3],
    gate: usize,
    stats: &mut EvalStats,
) -> Result<[SymKey; 3]> {
    let kb = params.key_bytes();
    if input.iter().any(|k| k.as_bytes().len() != kb) {
        return Err(Error::NoRowMatch { gate });
    }
    let row = find_row(oracle, params, &tables.forward, input, gate, stats)?;
    let out = split_keys(&cl_dec(oracle, input, row), kb);
    let out_refs = [&out[0], &out[1], &out[2]];
    let back_row = find_row(oracle, params, &tables.backward, out_refs, gate, stats)
        .map_err(|_| Error::BackwardMismatch { gate })?;
    let back = split_keys(&cl_dec(oracle, out_refs, back_row), kb);
    if back.iter().zip(input).any(|(a, b)| a != b) {
        return Err(Error::BackwardMismatch { gate });
    }
    Ok(out)
}

/// Apply one garbled Toffoli in a single pass over the terms: output
/// registers are appended after the current layout, input registers are
/// XOR-erased with the backward-table keys, checked to be zero and dropped.
#[allow(clippy::too_many_arguments)]
pub fn eval_toffoli(
    oracle: &RandomOracle,
    params: &CryptoParams,
    state: &mut SparseState,
    inputs: [usize; 3],
    outputs: [usize; 3],
    tables: &ToffoliTables,
    gate: usize,
    stats: &mut EvalStats,
) -> Result<()> {
    let k = params.kappa_bits;
    let kb = params.key_bytes();
    let in_names = inputs.map(wire_register);
    let in_locs = in_names
        .iter()
        .map(|n| state.layout().locate(n).map(|l| l.0))
        .collect::<Result<Vec<_>>>()?;
    let mut removal = in_locs.clone();
    removal.sort_unstable_by(|a, b| b.cmp(a));
    let mut layout = state.layout().without_all(&[&in_names[0], &in_names[1], &in_names[2]])?;
    let kept = layout.total_bits();
    for w in outputs {
        layout.push(wire_register(w), k)?;
    }
    let total = layout.total_bits();
    let mut memo: HashMap<Vec<u8>, Vec<u8>> = HashMap::new();
    state.remap(layout, |b| {
        let mut triple = Vec::with_capacity(3 * kb);
        for &off in &in_locs {
            triple.extend(b.get_bytes(off, k));
        }
        let out = match memo.get(&triple) {
            Some(o) => {
                stats.memo_hits += 1;
                o.clone()
            }
            None => {
                let keys = split_keys(&triple, kb);
                let o = eval_toffoli_term(oracle, params, tables, [&keys[0], &keys[1], &keys[2]], gate, stats)?;
                let o: Vec<u8> = o.iter().flat_map(|k| k.0.iter().copied()).collect();
                memo.insert(triple.clone(), o.clone());
                o
            }
        };
        // The backward table returned exactly `triple`; XOR it away.
        let mut img = b.clone();
        for (i, &off) in in_locs.iter().enumerate() {
            img.xor_bytes(off, k, &triple[i * kb..(i + 1) * kb]);
            stats.zero_checks += 1;
            if !img.is_zero_range(off, k) {
                return Err(Error::RegisterNotZero(in_names[i].clone()));
            }
        }
        for &off in &removal {
            img = img.remove_range(off, k);
        }
        let mut img = img.resized(total);
        for i in 0..3 {
            img.set_bytes(kept + i * k, k, &out[i * kb..(i + 1) * kb]);
        }
        Ok(img)
    })
}

fn phase_value(
    oracle: &RandomOracle,
    params: &CryptoParams,
    table: &PhaseTable,
    key: &SymKey,
    gate: usize,
    stats: &mut EvalStats,
) -> Result<u64> {
    let mut hit = None;
    for row in &table.rows {
        stats.rows_tried += 1;
        stats.ver_calls += 1;
        if kdmp_ver(oracle, params, key, &row.tag) {
            if hit.is_some() {
                return Err(Error::AmbiguousRow { gate });
            }
            hit = Some(row);
        }
    }
    let row = hit.ok_or(Error::NoRowMatch { gate })?;
    Ok(decode_phase_value(&kdmp_dec(oracle, key, row)))
}

/// Apply one garbled `R_Z(+-pi / 2^denom_exp)`: write `m` into a scratch
/// register, multiply by `omega_n^m`, erase `m` again.
#[allow(clippy::too_many_arguments)]
pub fn eval_phase(
    oracle: &RandomOracle,
    params: &CryptoParams,
    state: &mut SparseState,
    wire: usize,
    denom_exp: u32,
    table: &PhaseTable,
    gate: usize,
    stats: &mut EvalStats,
) -> Result<()> {
    let k = params.kappa_bits;
    let width = 8 * phase_payload_bytes(denom_exp);
    let (off, _) = state.layout().locate(&wire_register(wire))?;
    state.append_register(SCRATCH, width)?;
    let (soff, _) = state.layout().locate(SCRATCH)?;
    let mut memo: HashMap<Vec<u8>, u64> = HashMap::new();
    let modulus = 2u64 << denom_exp;
    let mut lookup = |b: &BitString, stats: &mut EvalStats| -> Result<u64> {
        let key = b.get_bytes(off, k);
        if let Some(&m) = memo.get(&key) {
            stats.memo_hits += 1;
            return Ok(m);
        }
        let m = phase_value(oracle, params, table, &SymKey(key.clone()), gate, stats)? % modulus;
        memo.insert(key, m);
        Ok(m)
    };
    state.apply_classical(|b| {
        let m = lookup(b, stats)?;
        let mut img = b.clone();
        img.xor_u64(soff, width.min(64), m);
        Ok(img)
    })?;
    state.apply_phase(1u64 << denom_exp, |b| b.get_u64(soff, width.min(64)) as i64);
    state.apply_classical(|b| {
        let m = lookup(b, stats)?;
        let mut img = b.clone();
        img.xor_u64(soff, width.min(64), m);
        Ok(img)
    })?;
    state.remove_register(SCRATCH)
}

/// Run every gate of `bundle` on an encoded state whose registers are
/// `w{l}` for the circuit's input wires. The result is laid out over the
/// output wires in order.
pub fn eval_bundle(
    oracle: &RandomOracle,
    bundle: &GarbledBundle,
    encoded: &SparseState,
) -> Result<(SparseState, EvalStats)> {
    bundle.validate()?;
    let params = &bundle.params;
    let c = &bundle.circuit;
    let k = params.kappa_bits;
    let want = RegisterLayout::new(c.input_wires().into_iter().map(|w| (wire_register(w), k)))?;
    if encoded.layout() != &want {
        return Err(Error::LayoutMismatch("encoded state does not match the circuit's input wires".into()));
    }
    let mut state = encoded.clone();
    let mut stats = EvalStats {
        terms: state.num_terms() as u64,
        max_terms: state.num_terms() as u64,
        ..EvalStats::default()
    };
    for (i, (g, t)) in c.gates().iter().zip(&bundle.tables).enumerate() {
        match (g, t) {
            (Gate::Toffoli { inputs, outputs }, GateTable::Toffoli(tt)) => {
                stats.toffolis += 1;
                eval_toffoli(oracle, params, &mut state, *inputs, *outputs, tt, i, &mut stats)?;
            }
            (
                Gate::Phase {
                    wire, denom_exp, ..
                },
                GateTable::Phase(pt),
            ) => {
                stats.phases += 1;
                eval_phase(oracle, params, &mut state, *wire, *denom_exp, pt, i, &mut stats)?;
            }
            _ => return Err(Error::Malformed(format!("gate {i}: table kind mismatch"))),
        }
        stats.gates += 1;
        stats.max_terms = stats.max_terms.max(state.num_terms() as u64);
    }
    let out = reorder(&state, c.output_wires(), k)?;
    Ok((out, stats))
}

/// Permute registers into the order of `wires`.
fn reorder(state: &SparseState, wires: &[usize], k: usize) -> Result<SparseState> {
    let layout = RegisterLayout::new(wires.iter().map(|&w| (wire_register(w), k)))?;
    if layout == *state.layout() {
        return Ok(state.clone());
    }
    if layout.total_bits() != state.layout().total_bits() {
        return Err(Error::LayoutMismatch("live registers differ from output wires".into()));
    }
    let src = wires
        .iter()
        .map(|&w| state.layout().locate(&wire_register(w)).map(|l| l.0))
        .collect::<Result<Vec<_>>>()?;
    let total = layout.total_bits();
    let terms = state.terms().iter().map(|(b, a)| {
        let mut out = BitString::zeros(total);
        for (i, &off) in src.iter().enumerate() {
            out.set_bytes(i * k, k, &b.get_bytes(off, k));
        }
        (out, *a)
    });
    SparseState::from_terms(layout, terms)
}
