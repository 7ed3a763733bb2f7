//! File formats: grayscale images, Matrix Market transports, OBJ meshes and
//! plain-text matrices.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use image::{ImageBuffer, Luma, LumaA, Rgb};
use nalgebra::{DMatrix, Point3, Vector3};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::scene::TriangleMesh;
use crate::transport::{LightTransport, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_level(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Quantizes `v` (clamped to [0, 1]) to the nearest integer level.
pub fn quantize(v: f64, depth: BitDepth) -> u16 {
    (v.clamp(0.0, 1.0) * depth.max_level()).round() as u16
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Reads an 8- or 16-bit grayscale PNG or PGM, normalized to [0, 1].
/// Color images are converted to luma.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    if is_pgm(path) {
        return read_pgm(&std::fs::read(path)?);
    }
    let dyn_img = image::open(path)?;
    let g = dyn_img.into_luma16();
    let (w, h) = g.dimensions();
    let data = g.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect();
    GrayImage::new(w as usize, h as usize, data)
}

/// Writes a grayscale image; the format follows the extension (`.pgm`,
/// otherwise PNG). Values are clamped to [0, 1].
pub fn write_image(path: &Path, img: &GrayImage, depth: BitDepth) -> Result<()> {
    let bytes = if is_pgm(path) {
        encode_pgm(img, depth)
    } else {
        encode_png(img, depth)?
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

fn png_bytes<P>(buf: &ImageBuffer<P, Vec<P::Subpixel>>) -> Result<Vec<u8>>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
{
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Grayscale PNG bytes; values are clamped to [0, 1].
pub fn encode_png(img: &GrayImage, depth: BitDepth) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    match depth {
        BitDepth::Eight => {
            let raw = img.data().iter().map(|&v| quantize(v, depth) as u8).collect();
            png_bytes(&ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("buffer size"))
        }
        BitDepth::Sixteen => {
            let raw = img.data().iter().map(|&v| quantize(v, depth)).collect();
            png_bytes(&ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).expect("buffer size"))
        }
    }
}

/// 16-bit grayscale PNG of raw integer levels.
pub fn encode_png_levels(width: usize, height: usize, levels: Vec<u16>) -> Result<Vec<u8>> {
    let buf = ImageBuffer::<Luma<u16>, _>::from_raw(width as u32, height as u32, levels)
        .ok_or_else(|| Error::ShapeMismatch("level raster size".into()))?;
    png_bytes(&buf)
}

/// 8-bit RGB PNG from interleaved samples.
pub fn encode_rgb_png(width: usize, height: usize, rgb: Vec<u8>) -> Result<Vec<u8>> {
    let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(width as u32, height as u32, rgb)
        .ok_or_else(|| Error::ShapeMismatch("RGB raster size".into()))?;
    png_bytes(&buf)
}

/// Binary (P5) PGM bytes; 16-bit samples are big-endian.
pub fn encode_pgm(img: &GrayImage, depth: BitDepth) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), depth.max_level() as u32).into_bytes();
    for &v in img.data() {
        let q = quantize(v, depth);
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&q.to_be_bytes()),
        }
    }
    out
}

/// Parses binary (P5) or ASCII (P2) PGM.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let mut header = Vec::new();
    while header.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM header field {s:?}")));
    let (w, h, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("PGM maxval {maxval} out of range")));
    }
    let n = w * h;
    let samples: Vec<usize> = match header[0].as_str() {
        "P5" => {
            let body = &bytes[(pos + 1).min(bytes.len())..];
            let bps = if maxval < 256 { 1 } else { 2 };
            if body.len() < n * bps {
                return Err(Error::Parse("truncated PGM raster".into()));
            }
            if bps == 1 {
                body[..n].iter().map(|&b| b as usize).collect()
            } else {
                body[..2 * n]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as usize)
                    .collect()
            }
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[pos..]);
            let v: Vec<usize> = text
                .split_whitespace()
                .take(n)
                .map(num)
                .collect::<Result<_>>()?;
            if v.len() < n {
                return Err(Error::Parse("truncated PGM raster".into()));
            }
            v
        }
        m => return Err(Error::Parse(format!("unsupported PGM magic {m:?}"))),
    };
    let data = samples
        .into_iter()
        .map(|s| (s.min(maxval)) as f64 / maxval as f64)
        .collect();
    GrayImage::new(w, h, data)
}

/// Two-channel 16-bit PNG raster: projector column and row per camera pixel,
/// `65535` in both channels where undecoded.
pub fn encode_correspondence_png(width: usize, height: usize, coords: &[Option<(u32, u32)>]) -> Result<Vec<u8>> {
    let mut raw = Vec::with_capacity(coords.len() * 2);
    for c in coords {
        let (u, v) = c.map_or((u16::MAX, u16::MAX), |(u, v)| (u.min(65534) as u16, v.min(65534) as u16));
        raw.push(u);
        raw.push(v);
    }
    let buf = ImageBuffer::<LumaA<u16>, _>::from_raw(width as u32, height as u32, raw)
        .ok_or_else(|| Error::ShapeMismatch("correspondence raster".into()))?;
    png_bytes(&buf)
}

pub fn write_correspondence_png(path: &Path, width: usize, height: usize, coords: &[Option<(u32, u32)>]) -> Result<()> {
    std::fs::write(path, encode_correspondence_png(width, height, coords)?)?;
    Ok(())
}

/// Writes `l` in Matrix Market coordinate format with 1-based indices.
/// Image dimensions and provenance travel in leading comment lines.
pub fn write_matrix_market<W: Write>(mut w: W, l: &LightTransport) -> Result<()> {
    let (ow, oh) = l.out_dims();
    let (iw, ih) = l.in_dims();
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "% dims {ow} {oh} {iw} {ih}")?;
    writeln!(w, "% provenance {}", l.provenance())?;
    writeln!(w, "{} {} {}", l.rows(), l.cols(), l.nnz())?;
    for r in 0..l.rows() {
        let (cols, vals) = l.row(r);
        for (c, v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:e}", r + 1, c + 1, v)?;
        }
    }
    Ok(())
}

/// Reads a Matrix Market coordinate file. Without a `% dims` comment the
/// matrix is taken as a single image row (`rows × 1` by `cols × 1`).
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<LightTransport> {
    let mut lines = r.lines();
    let banner = lines.next().ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
    let lower = banner.to_ascii_lowercase();
    if !lower.starts_with("%%matrixmarket matrix coordinate") {
        return Err(Error::Parse(format!("unsupported Matrix Market banner {banner:?}")));
    }
    if !(lower.contains("real") || lower.contains("integer")) || !lower.contains("general") {
        return Err(Error::Parse("only real general matrices are supported".into()));
    }
    let mut dims: Option<[usize; 4]> = None;
    let mut prov = Provenance::Synthetic;
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer {s:?}")));
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('%') {
            let c = c.trim();
            if let Some(rest) = c.strip_prefix("dims") {
                let v: Vec<usize> = rest.split_whitespace().map(parse_usize).collect::<Result<_>>()?;
                if v.len() != 4 {
                    return Err(Error::Parse("dims comment needs four values".into()));
                }
                dims = Some([v[0], v[1], v[2], v[3]]);
            } else if let Some(rest) = c.strip_prefix("provenance") {
                prov = rest.trim().parse()?;
            }
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if f.len() != 3 {
                    return Err(Error::Parse(format!("bad size line {t:?}")));
                }
                size = Some((parse_usize(f[0])?, parse_usize(f[1])?, parse_usize(f[2])?));
            }
            Some((rows, cols, _)) => {
                if f.len() != 3 {
                    return Err(Error::Parse(format!("bad entry line {t:?}")));
                }
                let (i, j) = (parse_usize(f[0])?, parse_usize(f[1])?);
                let v: f64 = f[2].parse().map_err(|_| Error::Parse(format!("bad value {:?}", f[2])))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::Parse(format!("entry ({i}, {j}) outside {rows}x{cols}")));
                }
                triplets.push((i - 1, j - 1, v));
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {}", triplets.len())));
    }
    let [ow, oh, iw, ih] = dims.unwrap_or([rows, 1, cols, 1]);
    if ow * oh != rows || iw * ih != cols {
        return Err(Error::Parse("dims comment disagrees with the size line".into()));
    }
    LightTransport::from_triplets((ow, oh), (iw, ih), triplets, prov)
}

/// Row-major plain text, one matrix row per line.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {v:?}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged or empty matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

/// Parses the `v`/`vn`/`f` subset of Wavefront OBJ. Polygons are fan
/// triangulated; faces without normal indices get computed vertex normals.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut verts = Vec::new();
    let mut normals = Vec::new();
    let mut tris = Vec::new();
    let mut tri_normals: Vec<Option<[usize; 3]>> = Vec::new();
    let float = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad OBJ number {s:?}")));
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(float).collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::Parse(format!("line {}: vertex needs 3 coordinates", ln + 1)));
                }
                verts.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("vn") => {
                let c: Vec<f64> = it.take(3).map(float).collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::Parse(format!("line {}: normal needs 3 components", ln + 1)));
                }
                let n = Vector3::new(c[0], c[1], c[2]);
                if n.norm() == 0.0 {
                    return Err(Error::Parse(format!("line {}: zero-length normal", ln + 1)));
                }
                normals.push(n);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    let mut parts = tok.split('/');
                    let resolve = |s: Option<&str>, n: usize| -> Result<Option<usize>> {
                        match s {
                            None | Some("") => Ok(None),
                            Some(s) => {
                                let i: i64 = s.parse().map_err(|_| Error::Parse(format!("line {}: bad index {s:?}", ln + 1)))?;
                                let k = if i < 0 { n as i64 + i } else { i - 1 };
                                if k < 0 || k as usize >= n {
                                    return Err(Error::Parse(format!("line {}: index {i} out of range", ln + 1)));
                                }
                                Ok(Some(k as usize))
                            }
                        }
                    };
                    let v = resolve(parts.next(), verts.len())?
                        .ok_or_else(|| Error::Parse(format!("line {}: face without vertex index", ln + 1)))?;
                    let _texture = parts.next();
                    let n = resolve(parts.next(), normals.len())?;
                    idx.push((v, n));
                }
                if idx.len() < 3 {
                    return Err(Error::Parse(format!("line {}: face needs 3 vertices", ln + 1)));
                }
                for k in 1..idx.len() - 1 {
                    let (a, b, c) = (idx[0], idx[k], idx[k + 1]);
                    tris.push([a.0, b.0, c.0]);
                    tri_normals.push(match (a.1, b.1, c.1) {
                        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                        _ => None,
                    });
                }
            }
            _ => {}
        }
    }
    if tris.is_empty() {
        return Err(Error::Parse("OBJ contains no faces".into()));
    }
    let computed = TriangleMesh::with_computed_normals(verts.clone(), tris.clone())?;
    if tri_normals.iter().all(Option::is_none) {
        return Ok(computed);
    }
    // explicit normals are per face-corner in OBJ; fold them onto vertices
    let mut acc = vec![Vector3::zeros(); verts.len()];
    let mut have = vec![false; verts.len()];
    for (t, tn) in tris.iter().zip(&tri_normals) {
        if let Some(tn) = tn {
            for k in 0..3 {
                acc[t[k]] += normals[tn[k]];
                have[t[k]] = true;
            }
        }
    }
    let merged: Vec<Vector3<f64>> = (0..verts.len())
        .map(|i| if have[i] && acc[i].norm() > 0.0 { acc[i].normalize() } else { computed.normals()[i] })
        .collect();
    TriangleMesh::new(verts, tris, merged)
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    parse_obj(&std::fs::read_to_string(path)?)
}

pub fn write_obj<W: Write>(mut w: W, mesh: &TriangleMesh) -> Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for n in mesh.normals() {
        writeln!(w, "vn {} {} {}", n.x, n.y, n.z)?;
    }
    for t in mesh.triangles() {
        writeln!(w, "f {0}//{0} {1}//{1} {2}//{2}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}
