//! Binary and JSON forms of [`StarkProof`].

use serde::{Deserialize, Serialize};

use super::field::GElement;
use super::fri::{FriProof, FriQuery, LayerOpening};
use super::merkle::Digest;
use super::{RowOpening, StarkError, StarkProof, NUM_COLUMNS};
use crate::codec::{read_varint, write_varint, Reader};

const VERSION: u8 = 1;

fn put_elems(out: &mut Vec<u8>, values: &[GElement]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_digests(out: &mut Vec<u8>, digests: &[Digest]) {
    write_varint(out, digests.len() as u64);
    for d in digests {
        out.extend_from_slice(d);
    }
}

fn malformed(e: impl std::fmt::Display) -> StarkError {
    StarkError::Malformed(e.to_string())
}

fn get_elem(r: &mut Reader<'_>) -> Result<GElement, StarkError> {
    GElement::from_le_bytes(r.take_array().map_err(malformed)?)
        .ok_or_else(|| malformed("non-canonical field element"))
}

fn get_elems<const N: usize>(r: &mut Reader<'_>) -> Result<[GElement; N], StarkError> {
    let mut out = [GElement::ZERO; N];
    for v in out.iter_mut() {
        *v = get_elem(r)?;
    }
    Ok(out)
}

fn get_len(r: &mut Reader<'_>, min_size: usize) -> Result<usize, StarkError> {
    r.count(min_size).map_err(malformed)
}

fn get_digests(r: &mut Reader<'_>) -> Result<Vec<Digest>, StarkError> {
    let n = get_len(r, 32)?;
    (0..n).map(|_| r.take_array().map_err(malformed)).collect()
}

impl StarkProof {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![VERSION, self.zk as u8];
        out.extend_from_slice(&self.trace_root);
        out.extend_from_slice(&self.composition_root);
        write_varint(&mut out, self.ood_values.len() as u64);
        put_elems(&mut out, &self.ood_values);
        put_digests(&mut out, &self.fri.layer_roots);
        write_varint(&mut out, self.fri.final_poly.len() as u64);
        put_elems(&mut out, &self.fri.final_poly);
        write_varint(&mut out, self.openings.len() as u64);
        for (row, query) in self.openings.iter().zip(&self.fri.queries) {
            put_elems(&mut out, &row.trace);
            put_digests(&mut out, &row.trace_path);
            put_elems(&mut out, &row.composition);
            put_digests(&mut out, &row.composition_path);
            // Layer count equals layer_roots.len().
            for layer in &query.layers {
                put_elems(&mut out, &layer.values);
                put_digests(&mut out, &layer.path);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<StarkProof, StarkError> {
        let mut r = Reader::new(bytes);
        if r.u8().map_err(malformed)? != VERSION {
            return Err(malformed("unknown proof version"));
        }
        let zk = match r.u8().map_err(malformed)? {
            0 => false,
            1 => true,
            b => return Err(malformed(format!("zk flag {b}"))),
        };
        let trace_root = r.take_array().map_err(malformed)?;
        let composition_root = r.take_array().map_err(malformed)?;
        let n_ood = get_len(&mut r, 8)?;
        let ood_values = (0..n_ood).map(|_| get_elem(&mut r)).collect::<Result<_, _>>()?;
        let layer_roots = get_digests(&mut r)?;
        let n_final = get_len(&mut r, 8)?;
        let final_poly = (0..n_final).map(|_| get_elem(&mut r)).collect::<Result<_, _>>()?;
        let n_queries = read_varint(&mut r).map_err(malformed)?;
        let mut openings = Vec::new();
        let mut queries = Vec::new();
        for _ in 0..n_queries {
            let trace = get_elems::<NUM_COLUMNS>(&mut r)?;
            let trace_path = get_digests(&mut r)?;
            let composition = get_elems::<2>(&mut r)?;
            let composition_path = get_digests(&mut r)?;
            openings.push(RowOpening { trace, trace_path, composition, composition_path });
            let layers = layer_roots
                .iter()
                .map(|_| Ok(LayerOpening { values: get_elems::<2>(&mut r)?, path: get_digests(&mut r)? }))
                .collect::<Result<_, StarkError>>()?;
            queries.push(FriQuery { layers });
        }
        r.finish().map_err(malformed)?;
        Ok(StarkProof {
            trace_root,
            composition_root,
            ood_values,
            fri: FriProof { layer_roots, final_poly, queries },
            openings,
            zk,
        })
    }

    pub fn to_json(&self) -> StarkProofJson {
        let hexes = |d: &[Digest]| d.iter().map(hex::encode).collect::<Vec<_>>();
        StarkProofJson {
            trace_root: hex::encode(self.trace_root),
            composition_root: hex::encode(self.composition_root),
            ood: self.ood_values.clone(),
            fri: FriJson {
                roots: hexes(&self.fri.layer_roots),
                final_poly: self.fri.final_poly.clone(),
                queries: self
                    .openings
                    .iter()
                    .zip(&self.fri.queries)
                    .map(|(row, q)| QueryJson {
                        trace: row.trace.to_vec(),
                        trace_path: hexes(&row.trace_path),
                        composition: row.composition.to_vec(),
                        composition_path: hexes(&row.composition_path),
                        layers: q
                            .layers
                            .iter()
                            .map(|l| LayerJson { values: l.values.to_vec(), path: hexes(&l.path) })
                            .collect(),
                    })
                    .collect(),
            },
            zk: self.zk,
        }
    }

    pub fn from_json(j: &StarkProofJson) -> Result<StarkProof, StarkError> {
        fn digest(s: &str) -> Result<Digest, StarkError> {
            hex::decode(s)
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| malformed(format!("bad digest {s:?}")))
        }
        fn digests(v: &[String]) -> Result<Vec<Digest>, StarkError> {
            v.iter().map(|s| digest(s)).collect()
        }
        fn arr<const N: usize>(v: &[GElement]) -> Result<[GElement; N], StarkError> {
            v.try_into().map_err(|_| malformed(format!("expected {N} field elements, got {}", v.len())))
        }
        let mut openings = Vec::new();
        let mut queries = Vec::new();
        for q in &j.fri.queries {
            openings.push(RowOpening {
                trace: arr(&q.trace)?,
                trace_path: digests(&q.trace_path)?,
                composition: arr(&q.composition)?,
                composition_path: digests(&q.composition_path)?,
            });
            let layers = q
                .layers
                .iter()
                .map(|l| Ok(LayerOpening { values: arr(&l.values)?, path: digests(&l.path)? }))
                .collect::<Result<_, StarkError>>()?;
            queries.push(FriQuery { layers });
        }
        Ok(StarkProof {
            trace_root: digest(&j.trace_root)?,
            composition_root: digest(&j.composition_root)?,
            ood_values: j.ood.clone(),
            fri: FriProof { layer_roots: digests(&j.fri.roots)?, final_poly: j.fri.final_poly.clone(), queries },
            openings,
            zk: j.zk,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarkProofJson {
    pub trace_root: String,
    pub composition_root: String,
    pub ood: Vec<GElement>,
    pub fri: FriJson,
    pub zk: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FriJson {
    pub roots: Vec<String>,
    pub final_poly: Vec<GElement>,
    pub queries: Vec<QueryJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryJson {
    pub trace: Vec<GElement>,
    pub trace_path: Vec<String>,
    pub composition: Vec<GElement>,
    pub composition_path: Vec<String>,
    pub layers: Vec<LayerJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerJson {
    pub values: Vec<GElement>,
    pub path: Vec<String>,
}
