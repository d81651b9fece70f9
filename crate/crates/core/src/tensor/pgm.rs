//! PGM image I/O for grids: binary P5 (8-bit) and ASCII P2.
//!
//! Values are scaled to [0,1] on read (dividing by the file's maxval)
//! and clamped to [0,1] then rescaled to 0..=255 on write.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::grid::Grid;
use crate::error::{Error, Result};

fn read_token<R: BufRead>(r: &mut R) -> Result<String> {
    let mut tok = String::new();
    let mut in_comment = false;
    loop {
        let mut byte = [0u8; 1];
        match r.read_exact(&mut byte) {
            Ok(()) => {}
            Err(e) => {
                if tok.is_empty() {
                    return Err(Error::Pgm(format!("unexpected end of header: {e}")));
                }
                return Ok(tok);
            }
        }
        let c = byte[0] as char;
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        if c == '#' {
            in_comment = true;
            continue;
        }
        if c.is_whitespace() {
            if tok.is_empty() {
                continue;
            }
            return Ok(tok);
        }
        tok.push(c);
    }
}

fn parse_dim(tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| Error::Pgm(format!("invalid {what}: {tok:?}")))
}

/// Reads a P5 (binary, 8-bit) or P2 (ASCII) PGM stream into a grid
/// scaled to [0,1].
pub fn read_pgm<R: Read>(reader: R) -> Result<Grid> {
    let mut r = BufReader::new(reader);
    let magic = read_token(&mut r)?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(Error::Pgm(format!("unsupported magic {other:?}"))),
    };
    let cols = parse_dim(&read_token(&mut r)?, "width")?;
    let rows = parse_dim(&read_token(&mut r)?, "height")?;
    let maxval = parse_dim(&read_token(&mut r)?, "maxval")?;
    if rows == 0 || cols == 0 {
        return Err(Error::Pgm("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Pgm(format!("unsupported maxval {maxval}")));
    }
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(rows * cols);
    if binary {
        let mut buf = vec![0u8; rows * cols];
        r.read_exact(&mut buf)
            .map_err(|e| Error::Pgm(format!("truncated pixel data: {e}")))?;
        data.extend(buf.iter().map(|&b| b as f64 / scale));
    } else {
        for _ in 0..rows * cols {
            let v = parse_dim(&read_token(&mut r)?, "pixel")?;
            if v > maxval {
                return Err(Error::Pgm(format!("pixel {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    }
    Grid::from_vec(rows, cols, data)
}

fn quantize(g: &Grid) -> Vec<u8> {
    g.data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// Writes a grid as binary P5, clamping to [0,1] and rescaling to 0..=255.
pub fn write_pgm_p5<W: Write>(g: &Grid, mut w: W) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", g.cols(), g.rows())?;
    w.write_all(&quantize(g))?;
    Ok(())
}

/// Writes a grid as ASCII P2.
pub fn write_pgm_p2<W: Write>(g: &Grid, mut w: W) -> Result<()> {
    writeln!(w, "P2\n{} {}\n255", g.cols(), g.rows())?;
    for row in quantize(g).chunks(g.cols()) {
        let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_pgm_path(path: impl AsRef<Path>) -> Result<Grid> {
    read_pgm(std::fs::File::open(path)?)
}

pub fn write_pgm_path(g: &Grid, path: impl AsRef<Path>) -> Result<()> {
    write_pgm_p5(g, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_round_trip_within_quantization() {
        let g = Grid::from_fn(5, 7, |i, j| ((i * 7 + j) as f64) / 34.0);
        let mut buf = Vec::new();
        write_pgm_p5(&g, &mut buf).unwrap();
        let back = read_pgm(&buf[..]).unwrap();
        assert_eq!(back.shape(), g.shape());
        for (a, b) in g.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn p2_parses_with_comments() {
        let text = "P2\n# a comment\n3 2\n255\n0 128 255\n64 32 16\n";
        let g = read_pgm(text.as_bytes()).unwrap();
        assert_eq!(g.shape(), (2, 3));
        assert!((g.get(0, 1) - 128.0 / 255.0).abs() < 1e-12);
        assert!((g.get(1, 2) - 16.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn p2_round_trip() {
        let g = Grid::from_fn(3, 3, |i, j| (i + j) as f64 / 4.0);
        let mut buf = Vec::new();
        write_pgm_p2(&g, &mut buf).unwrap();
        let back = read_pgm(&buf[..]).unwrap();
        for (a, b) in g.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn write_clamps_out_of_range() {
        let g = Grid::from_vec(1, 3, vec![-0.5, 0.5, 1.7]).unwrap();
        let mut buf = Vec::new();
        write_pgm_p5(&g, &mut buf).unwrap();
        let back = read_pgm(&buf[..]).unwrap();
        assert_eq!(back.get(0, 0), 0.0);
        assert_eq!(back.get(0, 2), 1.0);
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(read_pgm("P3\n1 1\n255\n0\n".as_bytes()).is_err());
    }
}
