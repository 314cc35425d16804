//! Binary parameter checkpoints.
//!
//! Layout: one ASCII header line
//! `logic-embed-checkpoint v1 kind=<K> d=<d> dt=<d̃> entities=<n> relations=<m> roles=<1|2>`
//! followed by little-endian `f64` values: entity vectors in index order,
//! object-role vectors (Tucker2 only), then relation vectors.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ModelKind, ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;

const MAGIC: &str = "logic-embed-checkpoint v1";

pub fn write_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    let spec = &params.spec;
    let mut buf = Vec::new();
    writeln!(
        buf,
        "{MAGIC} kind={} d={} dt={} entities={} relations={} roles={}",
        spec.kind,
        spec.rel_dim,
        spec.ent_dim,
        params.num_entities(),
        params.num_relations(),
        if params.entities2.is_some() { 2 } else { 1 }
    )?;
    let blocks = params
        .entities
        .iter()
        .chain(params.entities2.iter().flatten())
        .chain(params.relations.iter());
    for v in blocks {
        for x in v {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse(1, "missing checkpoint header"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::parse(1, "header is not UTF-8"))?;
    let fields = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::parse(1, "not a checkpoint file"))?;

    let mut kind = None;
    let (mut d, mut dt, mut ne, mut nr, mut roles) = (None, None, None, None, None);
    for kv in fields.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::parse(1, format!("bad header field `{kv}`")))?;
        let num = || v.parse::<usize>().map_err(|_| Error::parse(1, format!("bad value in `{kv}`")));
        match k {
            "kind" => kind = Some(v.parse::<ModelKind>()?),
            "d" => d = Some(num()?),
            "dt" => dt = Some(num()?),
            "entities" => ne = Some(num()?),
            "relations" => nr = Some(num()?),
            "roles" => roles = Some(num()?),
            _ => return Err(Error::parse(1, format!("unknown header field `{k}`"))),
        }
    }
    let missing = || Error::parse(1, "incomplete checkpoint header");
    let spec = ModelSpec::with_dims(kind.ok_or_else(missing)?, d.ok_or_else(missing)?, dt.ok_or_else(missing)?)?;
    let (ne, nr, roles) = (ne.ok_or_else(missing)?, nr.ok_or_else(missing)?, roles.ok_or_else(missing)?);
    if (roles == 2) != spec.has_role_vectors() {
        return Err(Error::parse(1, "role count does not match model kind"));
    }

    let body = &bytes[nl + 1..];
    let expected = (ne * spec.ent_dim * roles + nr * spec.rel_dim) * 8;
    if body.len() != expected {
        return Err(Error::Dimension {
            expected,
            actual: body.len(),
        });
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let mut take = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| values.by_ref().take(cols).collect())
            .collect()
    };
    let entities = take(ne, spec.ent_dim);
    let entities2 = (roles == 2).then(|| take(ne, spec.ent_dim));
    let relations = take(nr, spec.rel_dim);
    Ok(ModelParams {
        spec,
        entities,
        entities2,
        relations,
    })
}

/// Writes the text manifest mapping checkpoint indices to symbols.
pub fn write_manifest(path: &Path, graph: &KnowledgeGraph) -> Result<()> {
    let mut out = String::new();
    for (i, name) in graph.entities().names().iter().enumerate() {
        out.push_str(&format!("entity\t{i}\t{name}\n"));
    }
    for (i, name) in graph.relations().names().iter().enumerate() {
        out.push_str(&format!("relation\t{i}\t{name}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use crate::scoring::{init_params, EntityDomain};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [ModelKind::B, ModelKind::Tucker2] {
            let spec = ModelSpec::new(kind, 3);
            let p = init_params(spec, 4, 2, EntityDomain::Free, &mut stream(1, Stream::Init));
            let path = dir.path().join(format!("{kind}.ckpt"));
            write_checkpoint(&path, &p).unwrap();
            assert_eq!(read_checkpoint(&path).unwrap(), p);
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = init_params(ModelSpec::new(ModelKind::A, 2), 2, 1, EntityDomain::Free, &mut stream(1, Stream::Init));
        let path = dir.path().join("p.ckpt");
        write_checkpoint(&path, &p).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, bytes).unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
