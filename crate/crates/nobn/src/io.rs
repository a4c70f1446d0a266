//! Network (JSON) and query (JSON Lines) files.
//!
//! Network files look like
//!
//! ```json
//! {"diseases":[{"id":0,"name":"flu","prior":0.01}],
//!  "symptoms":[{"id":7,"name":"fever","leak":0.001}],
//!  "edges":[[7,0,0.8]]}
//! ```
//!
//! `leak` is optional and defaults to 0. Ids are arbitrary integers; they are
//! re-indexed densely in file order. [`write_network`] emits a canonical
//! layout (one record per line, edges ordered by symptom then disease, leak
//! omitted when zero) that reads back bit-exactly.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nobn_core::synth::{disease_name, symptom_name, NetworkStream};
use nobn_core::{DiseaseId, NetworkBuilder, NoisyOrNetwork, Query, SymptomId};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("parse error{}: {message}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] nobn_core::Error),
}

impl FileError {
    fn parse(line: Option<usize>, err: impl std::fmt::Display) -> Self {
        FileError::Parse {
            line,
            message: err.to_string(),
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        FileError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiseaseRecord {
    id: i64,
    name: String,
    prior: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SymptomRecord {
    id: i64,
    name: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    leak: f64,
}

#[derive(Debug, Deserialize)]
struct NetworkFile {
    diseases: Vec<DiseaseRecord>,
    symptoms: Vec<SymptomRecord>,
    #[serde(default)]
    edges: Vec<(i64, i64, f64)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct QueryRecord {
    positive: Vec<i64>,
    #[serde(default)]
    negative: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<i64>,
}

pub fn read_network(reader: impl Read) -> Result<NoisyOrNetwork, FileError> {
    let file: NetworkFile = serde_json::from_reader(BufReader::new(reader))
        .map_err(|e| FileError::parse(Some(e.line()), e))?;
    let mut b =
        NetworkBuilder::with_capacity(file.diseases.len(), file.symptoms.len(), file.edges.len());
    for d in file.diseases {
        b.add_disease(d.id, d.name, d.prior)?;
    }
    for s in file.symptoms {
        b.add_symptom(s.id, s.name, s.leak)?;
    }
    for (s, d, p) in file.edges {
        b.add_edge(s, d, p)?;
    }
    Ok(b.build()?)
}

pub fn parse_network(text: &str) -> Result<NoisyOrNetwork, FileError> {
    read_network(text.as_bytes())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NoisyOrNetwork, FileError> {
    let path = path.as_ref();
    read_network(File::open(path).map_err(|e| FileError::io(path, e))?)
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("records serialize")
}

fn write_header(w: &mut impl Write, key: &str, first: bool) -> io::Result<()> {
    if !first {
        w.write_all(b"\n],\n")?;
    }
    write!(w, "\"{key}\":[")
}

fn write_item(w: &mut impl Write, first: &mut bool, item: &str) -> io::Result<()> {
    w.write_all(if *first { b"\n" } else { b",\n" })?;
    *first = false;
    w.write_all(item.as_bytes())
}

/// Writes the canonical layout.
pub fn write_network(mut w: impl Write, net: &NoisyOrNetwork) -> io::Result<()> {
    w.write_all(b"{")?;
    write_header(&mut w, "diseases", true)?;
    let mut first = true;
    for d in net.diseases() {
        let rec = DiseaseRecord {
            id: d.key,
            name: d.name.clone(),
            prior: d.prior,
        };
        write_item(&mut w, &mut first, &json(&rec))?;
    }
    write_header(&mut w, "symptoms", false)?;
    let mut first = true;
    for s in net.symptoms() {
        let rec = SymptomRecord {
            id: s.key,
            name: s.name.clone(),
            leak: s.leak,
        };
        write_item(&mut w, &mut first, &json(&rec))?;
    }
    write_header(&mut w, "edges", false)?;
    let mut first = true;
    for j in net.symptom_ids() {
        let sk = net.symptom(j).key;
        for p in net.parents(j) {
            write_item(
                &mut w,
                &mut first,
                &json(&(sk, net.disease(p.disease).key, p.p)),
            )?;
        }
    }
    w.write_all(b"\n]}\n")?;
    w.flush()
}

pub fn save_network(path: impl AsRef<Path>, net: &NoisyOrNetwork) -> Result<(), FileError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FileError::io(path, e))?;
    write_network(BufWriter::new(file), net).map_err(|e| FileError::io(path, e))
}

/// Writes a generated network without materializing it; the output is
/// byte-identical to generating in memory and calling [`write_network`].
/// Returns the edge count.
pub fn write_network_stream(mut w: impl Write, stream: NetworkStream) -> io::Result<u64> {
    let n_symptoms = stream.spec().n_symptoms;
    w.write_all(b"{")?;
    write_header(&mut w, "diseases", true)?;
    let mut first = true;
    for (i, &prior) in stream.priors().iter().enumerate() {
        let rec = DiseaseRecord {
            id: i as i64,
            name: disease_name(i as u32),
            prior,
        };
        write_item(&mut w, &mut first, &json(&rec))?;
    }
    write_header(&mut w, "symptoms", false)?;
    let mut first = true;
    for j in 0..n_symptoms {
        let rec = SymptomRecord {
            id: j as i64,
            name: symptom_name(j),
            leak: 0.0,
        };
        write_item(&mut w, &mut first, &json(&rec))?;
    }
    write_header(&mut w, "edges", false)?;
    let mut first = true;
    let mut count = 0;
    for (s, d, p) in stream {
        write_item(&mut w, &mut first, &json(&(s as i64, d as i64, p)))?;
        count += 1;
    }
    w.write_all(b"\n]}\n")?;
    w.flush()?;
    Ok(count)
}

/// Parses one JSON Lines query against `net`'s ids.
pub fn parse_query(net: &NoisyOrNetwork, text: &str) -> Result<Query, FileError> {
    let rec: QueryRecord = serde_json::from_str(text).map_err(|e| FileError::parse(None, e))?;
    Ok(query_from_record(net, rec)?)
}

fn query_from_record(net: &NoisyOrNetwork, rec: QueryRecord) -> Result<Query, nobn_core::Error> {
    let map = |ids: &[i64]| {
        ids.iter()
            .map(|&k| net.symptom_by_key(k))
            .collect::<Result<Vec<SymptomId>, _>>()
    };
    let label = rec.label.map(|k| net.disease_by_key(k)).transpose()?;
    let q = Query::new(map(&rec.positive)?, map(&rec.negative)?, label);
    q.validate(net)?;
    Ok(q)
}

pub fn read_queries(net: &NoisyOrNetwork, reader: impl Read) -> Result<Vec<Query>, FileError> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| FileError::parse(Some(n + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: QueryRecord =
            serde_json::from_str(&line).map_err(|e| FileError::parse(Some(n + 1), e))?;
        out.push(query_from_record(net, rec)?);
    }
    Ok(out)
}

pub fn load_queries(net: &NoisyOrNetwork, path: impl AsRef<Path>) -> Result<Vec<Query>, FileError> {
    let path = path.as_ref();
    read_queries(net, File::open(path).map_err(|e| FileError::io(path, e))?)
}

pub fn query_line(net: &NoisyOrNetwork, q: &Query) -> String {
    let keys = |ids: &[SymptomId]| ids.iter().map(|&s| net.symptom(s).key).collect();
    json(&QueryRecord {
        positive: keys(&q.positive),
        negative: keys(&q.negative),
        label: q.label.map(|d: DiseaseId| net.disease(d).key),
    })
}

pub fn write_queries(mut w: impl Write, net: &NoisyOrNetwork, queries: &[Query]) -> io::Result<()> {
    for q in queries {
        writeln!(w, "{}", query_line(net, q))?;
    }
    w.flush()
}

pub fn save_queries(
    path: impl AsRef<Path>,
    net: &NoisyOrNetwork,
    queries: &[Query],
) -> Result<(), FileError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FileError::io(path, e))?;
    write_queries(BufWriter::new(file), net, queries).map_err(|e| FileError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nobn_core::synth::{gen_network, NetworkSpec};
    use nobn_core::{Entity, Error, ValidationError};

    const MINIMAL: &str = r#"{"diseases":[{"id":3,"name":"d","prior":0.1}],
        "symptoms":[{"id":9,"name":"f"}],"edges":[[9,3,0.5]]}"#;

    #[test]
    fn minimal_file() {
        let net = parse_network(MINIMAL).unwrap();
        assert_eq!(
            (net.n_diseases(), net.n_symptoms(), net.n_edges()),
            (1, 1, 1)
        );
        assert_eq!(net.symptom_by_key(9).unwrap(), SymptomId(0));
        assert_eq!(net.leak(SymptomId(0)), 0.0);
    }

    #[test]
    fn invalid_files() {
        let prior_one = MINIMAL.replace("0.1", "1.0");
        match parse_network(&prior_one) {
            Err(FileError::Invalid(Error::Validation(ValidationError { entity, .. }))) => {
                assert_eq!(entity, Entity::Disease(3))
            }
            other => panic!("{other:?}"),
        }
        let dup = MINIMAL.replace("[[9,3,0.5]]", "[[9,3,0.5],[9,3,0.25]]");
        assert!(matches!(
            parse_network(&dup),
            Err(FileError::Invalid(Error::Validation(_)))
        ));
        assert!(matches!(
            parse_network("{\"diseases\":"),
            Err(FileError::Parse { .. })
        ));
        let unknown = MINIMAL.replace("[[9,3,0.5]]", "[[9,4,0.5]]");
        assert!(parse_network(&unknown).is_err());
    }

    #[test]
    fn canonical_round_trip_is_bit_exact() {
        let mut spec = NetworkSpec::f120_like(5);
        spec.n_diseases = 60;
        spec.n_symptoms = 90;
        spec.density = 0.1;
        let net = gen_network(&spec).unwrap();
        let mut first = Vec::new();
        write_network(&mut first, &net).unwrap();
        let back = read_network(first.as_slice()).unwrap();
        assert_eq!(back, net);
        let mut second = Vec::new();
        write_network(&mut second, &back).unwrap();
        assert_eq!(first, second);

        let mut streamed = Vec::new();
        let edges = write_network_stream(&mut streamed, NetworkStream::new(spec).unwrap()).unwrap();
        assert_eq!(edges as usize, net.n_edges());
        assert_eq!(streamed, first);
    }

    #[test]
    fn leak_is_kept_when_nonzero() {
        let text = MINIMAL.replace("\"name\":\"f\"", "\"name\":\"f\",\"leak\":0.125");
        let net = parse_network(&text).unwrap();
        let mut out = Vec::new();
        write_network(&mut out, &net).unwrap();
        assert!(String::from_utf8(out.clone())
            .unwrap()
            .contains("\"leak\":0.125"));
        assert_eq!(read_network(out.as_slice()).unwrap(), net);
    }

    #[test]
    fn query_lines() {
        let net = parse_network(MINIMAL).unwrap();
        let qs = read_queries(
            &net,
            "{\"positive\":[9],\"label\":3}\n\n{\"positive\":[],\"negative\":[9]}\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(qs.len(), 2);
        assert_eq!(qs[0].label, Some(DiseaseId(0)));
        assert_eq!(
            query_line(&net, &qs[0]),
            "{\"positive\":[9],\"negative\":[],\"label\":3}"
        );
        assert!(read_queries(&net, "{\"positive\":[1]}".as_bytes()).is_err());
        assert!(read_queries(&net, "{\"positive\":[9],\"negative\":[9]}".as_bytes()).is_err());
        match read_queries(&net, "{\"positive\":[9]}\nnot json\n".as_bytes()) {
            Err(FileError::Parse { line, .. }) => assert_eq!(line, Some(2)),
            other => panic!("{other:?}"),
        }
    }
}
