//! Binary dataset format and CSV import/export.
//!
//! Dataset layout, all little-endian:
//!
//! ```text
//! "CCH1" | u32 N | u32 A | u32 S | u8 D | f64 frequency_grid[S]
//!        | N x (A*S) interleaved (re, im) f64 pairs
//!        | if D > 0: N x D f64 positions
//! ```

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::channel::{ChannelDataset, ChannelVector, Chart, DistanceMatrix, Points};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CCH1";
pub const HEADER_LEN: u64 = 17;

struct CountingWriter<W> {
    inner: W,
    written: u64,
}

impl<W: Write> CountingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.inner.write_all(bytes).map_err(|source| Error::Write {
            offset: self.written,
            source,
        })?;
        self.written += bytes.len() as u64;
        Ok(())
    }
}

/// Serialized size in bytes of a dataset with the given shape.
pub fn encoded_len(n: u64, antennas: u64, subcarriers: u64, pos_dim: u64) -> Option<u64> {
    let m = antennas.checked_mul(subcarriers)?;
    let grid = subcarriers.checked_mul(8)?;
    let channels = n.checked_mul(m)?.checked_mul(16)?;
    let positions = n.checked_mul(pos_dim)?.checked_mul(8)?;
    HEADER_LEN
        .checked_add(grid)?
        .checked_add(channels)?
        .checked_add(positions)
}

/// Writes `dataset` in the binary format and returns the number of bytes written.
pub fn write_dataset<W: Write>(dataset: &ChannelDataset, sink: W) -> Result<u64> {
    let mut out = CountingWriter {
        inner: sink,
        written: 0,
    };
    let pos_dim = dataset.positions().map_or(0, Points::dim);
    let as_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Invariant(format!("{what} = {v} exceeds u32")))
    };
    out.put(MAGIC)?;
    out.put(&as_u32(dataset.len(), "N")?.to_le_bytes())?;
    out.put(&as_u32(dataset.antennas(), "A")?.to_le_bytes())?;
    out.put(&as_u32(dataset.subcarriers(), "S")?.to_le_bytes())?;
    out.put(&[pos_dim as u8])?;
    for f in dataset.frequency_grid() {
        out.put(&f.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(16 * dataset.channel_dim());
    for ch in dataset.channels() {
        buf.clear();
        for z in ch.entries() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
        out.put(&buf)?;
    }
    if let Some(p) = dataset.positions() {
        for x in p.as_slice() {
            out.put(&x.to_le_bytes())?;
        }
    }
    out.inner.flush().map_err(|source| Error::Write {
        offset: out.written,
        source,
    })?;
    Ok(out.written)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

/// Reads a dataset written by [`write_dataset`]. Malformed input is rejected.
pub fn read_dataset<R: Read>(mut source: R) -> Result<ChannelDataset> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let actual = bytes.len() as u64;
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing CCH1 magic".into()));
    }
    if actual < HEADER_LEN {
        return Err(Error::Truncated {
            location: "header".into(),
            expected: HEADER_LEN,
            actual,
        });
    }
    let n = u32_at(&bytes, 4) as usize;
    let a = u32_at(&bytes, 8) as usize;
    let s = u32_at(&bytes, 12) as usize;
    let d = bytes[16] as usize;
    if !matches!(d, 0 | 2 | 3) {
        return Err(Error::Format(format!("position dimension {d} not in {{0, 2, 3}}")));
    }
    if a == 0 || s == 0 || n == 0 {
        return Err(Error::Invariant(format!(
            "header declares N={n}, A={a}, S={s}; all must be positive"
        )));
    }
    let m = a * s;
    let expected = encoded_len(n as u64, a as u64, s as u64, d as u64)
        .ok_or_else(|| Error::Format("declared sizes overflow".into()))?;
    let grid_end = HEADER_LEN + 8 * s as u64;
    let channel_bytes = 16 * m as u64;
    let channels_end = grid_end + channel_bytes * n as u64;
    if actual < expected {
        let location = if actual < grid_end {
            "frequency grid".to_string()
        } else if actual < channels_end {
            format!("channel {}", (actual - grid_end) / channel_bytes)
        } else {
            format!("position {}", (actual - channels_end) / (8 * d as u64))
        };
        return Err(Error::Truncated {
            location,
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after the declared payload",
            actual - expected
        )));
    }

    let mut at = HEADER_LEN as usize;
    let grid: Vec<f64> = (0..s).map(|k| f64_at(&bytes, at + 8 * k)).collect();
    at += 8 * s;
    let mut channels = Vec::with_capacity(n);
    for _ in 0..n {
        let entries = (0..m)
            .map(|k| Complex64::new(f64_at(&bytes, at + 16 * k), f64_at(&bytes, at + 16 * k + 8)))
            .collect();
        at += 16 * m;
        channels.push(ChannelVector::new(entries, a, s)?);
    }
    let positions = if d > 0 {
        let data = (0..n * d).map(|k| f64_at(&bytes, at + 8 * k)).collect();
        Some(Points::new(d, data)?)
    } else {
        None
    };
    ChannelDataset::new(channels, positions, grid, String::new())
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source)
}

/// Parses channels from CSV: each row holds `2*A*S` interleaved real and
/// imaginary parts, optionally followed by 2 or 3 position columns. A leading
/// non-numeric row is treated as a header. Row numbers in errors count data
/// rows from 1.
pub fn import_csv<R: Read>(
    source: R,
    antennas: usize,
    subcarriers: usize,
    frequency_grid: Vec<f64>,
) -> Result<ChannelDataset> {
    if antennas == 0 || subcarriers == 0 {
        return Err(Error::Invariant("A and S must be positive".into()));
    }
    let m = antennas * subcarriers;
    let mut channels = Vec::new();
    let mut coords = Vec::new();
    let mut pos_dim: Option<usize> = None;
    let mut row = 0;
    for (line, record) in csv_reader(source).records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: row + 1,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    row: row + 1,
                    message: e.to_string(),
                })
            }
        };
        row += 1;
        let extra = values.len().checked_sub(2 * m);
        let d = match extra {
            Some(d @ (0 | 2 | 3)) => d,
            _ => {
                return Err(Error::Parse {
                    row,
                    message: format!(
                        "found {} fields, expected {} (+2 or +3 position columns)",
                        values.len(),
                        2 * m
                    ),
                })
            }
        };
        match pos_dim {
            None => pos_dim = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::Parse {
                    row,
                    message: format!("found {} fields, expected {}", values.len(), 2 * m + prev),
                })
            }
            _ => {}
        }
        let entries = values[..2 * m]
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        channels.push(ChannelVector::new(entries, antennas, subcarriers)?);
        coords.extend_from_slice(&values[2 * m..]);
    }
    let positions = match pos_dim {
        Some(d) if d > 0 => Some(Points::new(d, coords)?),
        _ => None,
    };
    ChannelDataset::new(channels, positions, frequency_grid, "imported from csv")
}

fn write_row<W: Write>(out: &mut W, values: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        write!(out, "{v}")?;
    }
    out.write_all(b"\n")
}

/// Full matrix, row-major, header `c0,c1,...`.
pub fn write_distance_csv<W: Write>(matrix: &DistanceMatrix, mut out: W) -> Result<()> {
    let n = matrix.size();
    let header: Vec<String> = (0..n).map(|j| format!("c{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..n {
        write_row(&mut out, matrix.row(i).iter().copied())?;
    }
    out.flush()?;
    Ok(())
}

/// Chart coordinates as `z1..zD'` columns, followed by `p1..pD` ground truth
/// columns when positions are given.
pub fn write_chart_csv<W: Write>(chart: &Chart, positions: Option<&Points>, mut out: W) -> Result<()> {
    let mut header: Vec<String> = (1..=chart.dim()).map(|c| format!("z{c}")).collect();
    if let Some(p) = positions {
        if p.len() != chart.len() {
            return Err(Error::Invariant(format!(
                "{} positions for {} chart points",
                p.len(),
                chart.len()
            )));
        }
        header.extend((1..=p.dim()).map(|c| format!("p{c}")));
    }
    writeln!(out, "{}", header.join(","))?;
    for i in 0..chart.len() {
        let pos = positions.map(|p| p.row(i)).unwrap_or(&[]);
        write_row(
            &mut out,
            chart.points().row(i).iter().chain(pos).copied(),
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Quality curves as `K,CT,TW` rows.
pub fn write_curves_csv<W: Write>(ks: &[usize], ct: &[f64], tw: &[f64], mut out: W) -> Result<()> {
    if ct.len() != ks.len() || tw.len() != ks.len() {
        return Err(Error::Invariant("curve columns differ in length".into()));
    }
    writeln!(out, "K,CT,TW")?;
    for ((k, c), t) in ks.iter().zip(ct).zip(tw) {
        writeln!(out, "{k},{c},{t}")?;
    }
    out.flush()?;
    Ok(())
}

/// Numeric CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// Points made of the columns whose header starts with `prefix` followed
    /// by a digit; if none match and `fallback_all` is set, every column.
    pub fn points_with_prefix(&self, prefix: &str, fallback_all: bool) -> Result<Option<Points>> {
        let mut cols: Vec<usize> = self
            .headers
            .iter()
            .enumerate()
            .filter(|(_, h)| {
                h.strip_prefix(prefix)
                    .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
            })
            .map(|(i, _)| i)
            .collect();
        if cols.is_empty() {
            if !fallback_all {
                return Ok(None);
            }
            cols = (0..self.headers.len()).collect();
        }
        let data = self
            .rows
            .iter()
            .flat_map(|r| cols.iter().map(move |&c| r[c]))
            .collect();
        Points::new(cols.len(), data).map(Some)
    }
}

/// Reads a header row followed by numeric rows of equal width.
pub fn read_table<R: Read>(source: R) -> Result<Table> {
    let mut records = csv_reader(source).into_records();
    let headers: Vec<String> = match records.next() {
        Some(r) => r
            .map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect(),
        None => return Err(Error::Format("no data".into())),
    };
    let mut rows = Vec::new();
    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("found {} fields, header has {}", record.len(), headers.len()),
            });
        }
        let values = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Format("no data".into()));
    }
    Ok(Table { headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ChannelDataset {
        let h = ChannelVector::new(vec![Complex64::new(1.0, 0.0)], 1, 1).unwrap();
        ChannelDataset::new(vec![h], None, vec![2e9], "").unwrap()
    }

    fn with_positions(n: usize) -> ChannelDataset {
        let channels = (0..n)
            .map(|i| {
                ChannelVector::new(
                    (0..6).map(|m| Complex64::new(i as f64, m as f64 * 0.5)).collect(),
                    3,
                    2,
                )
                .unwrap()
            })
            .collect();
        let pos = Points::new(2, (0..2 * n).map(|k| k as f64 - 0.25).collect()).unwrap();
        ChannelDataset::new(channels, Some(pos), vec![1e9, 1.1e9], "").unwrap()
    }

    #[test]
    fn smallest_dataset_byte_count() {
        let mut buf = Vec::new();
        let written = write_dataset(&tiny(), &mut buf).unwrap();
        // header + one grid frequency + one complex entry
        assert_eq!(written, 17 + 8 + 16);
        assert_eq!(buf.len() as u64, written);
        assert_eq!(&buf[..4], b"CCH1");
        assert_eq!(read_dataset(&buf[..]).unwrap(), tiny());
    }

    #[test]
    fn positions_flag_and_byte_count() {
        let n = 7;
        let ds = with_positions(n);
        let mut buf = Vec::new();
        let written = write_dataset(&ds, &mut buf).unwrap();
        assert_eq!(buf[16], 2);
        let without = 17 + 8 * 2 + 16 * 6 * n as u64;
        assert_eq!(written - without, 2 * n as u64 * 8);
        assert_eq!(read_dataset(&buf[..]).unwrap(), ds);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut buf = Vec::new();
        write_dataset(&tiny(), &mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_dataset(&buf[..]), Err(Error::Format(_))));
        assert!(matches!(read_dataset(&b""[..]), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_names_the_channel() {
        let ds = with_positions(4);
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let grid_end = 17 + 16;
        // cut in the middle of channel 2
        let cut = grid_end + 2 * 96 + 40;
        match read_dataset(&buf[..cut]) {
            Err(Error::Truncated {
                location,
                expected,
                actual,
            }) => {
                assert_eq!(location, "channel 2");
                assert_eq!(expected, buf.len() as u64);
                assert_eq!(actual, cut as u64);
            }
            other => panic!("unexpected {other:?}"),
        }
        match read_dataset(&buf[..buf.len() - 3]) {
            Err(Error::Truncated { location, .. }) => assert_eq!(location, "position 3"),
            other => panic!("unexpected {other:?}"),
        }
        match read_dataset(&buf[..10]) {
            Err(Error::Truncated { location, .. }) => assert_eq!(location, "header"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_and_bad_dims_are_rejected() {
        let mut buf = Vec::new();
        write_dataset(&tiny(), &mut buf).unwrap();
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_dataset(&extra[..]), Err(Error::Format(_))));
        let mut bad_d = buf.clone();
        bad_d[16] = 1;
        assert!(matches!(read_dataset(&bad_d[..]), Err(Error::Format(_))));
        let mut zero_a = buf;
        zero_a[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(read_dataset(&zero_a[..]), Err(Error::Invariant(_))));
    }

    struct FailAfter(usize);

    impl Write for FailAfter {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            if buf.len() > self.0 {
                return Err(std::io::Error::other("disk full"));
            }
            self.0 -= buf.len();
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_failure_reports_offset() {
        match write_dataset(&with_positions(3), FailAfter(30)) {
            Err(Error::Write { offset, .. }) => assert_eq!(offset, 25),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_basic_row() {
        let ds = import_csv("1,0,0,1\n".as_bytes(), 2, 1, vec![1e9]).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.channel(0).entries(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        assert!(ds.positions().is_none());
    }

    #[test]
    fn csv_ragged_row_reports_row_number() {
        match import_csv("1,0,0\n".as_bytes(), 2, 1, vec![1e9]) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
        match import_csv("h0,h1,h2,h3\n1,0,0,1\n1,0,0,1,5\n".as_bytes(), 2, 1, vec![1e9]) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_with_positions() {
        let text = "re0,im0,x,y\n1,2,10,20\n3,4,30,40\n";
        let ds = import_csv(text.as_bytes(), 1, 1, vec![1e9]).unwrap();
        let p = ds.positions().unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.row(1), &[30.0, 40.0]);
        assert_eq!(ds.channel(1).entries()[0], Complex64::new(3.0, 4.0));
    }

    #[test]
    fn table_round_trip_through_chart_csv() {
        let chart = Chart::new(Points::new(2, vec![0.5, -1.0, 1e-300, 3.0]).unwrap()).unwrap();
        let pos = Points::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_chart_csv(&chart, Some(&pos), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("z1,z2,p1,p2\n"));
        let table = read_table(&buf[..]).unwrap();
        assert_eq!(table.points_with_prefix("z", false).unwrap().unwrap(), *chart.points());
        assert_eq!(table.points_with_prefix("p", false).unwrap().unwrap(), pos);
        assert!(read_table("z1,z2\n".as_bytes()).is_err());
    }
}
