use std::path::Path;

use super::{read_to_string, Loaded};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// Regular elevation grid in geographic coordinates.
///
/// Row 0 is the southernmost row; `origin` is the center of the lower-left
/// cell. `values` is row-major in that orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct DemGrid {
    origin: GeoPoint,
    cell_size: f64,
    ncols: usize,
    nrows: usize,
    nodata: f64,
    values: Vec<f64>,
}

impl DemGrid {
    pub fn new(origin: GeoPoint, cell_size: f64, ncols: usize, nrows: usize, nodata: f64, values: Vec<f64>) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::Validation(format!("DEM cell size must be positive, got {cell_size}")));
        }
        if ncols == 0 || nrows == 0 {
            return Err(Error::Validation("DEM must have at least one row and column".into()));
        }
        if values.len() != ncols * nrows {
            return Err(Error::Validation(format!(
                "DEM has {} values, expected {}x{}",
                values.len(),
                ncols,
                nrows
            )));
        }
        Ok(DemGrid {
            origin,
            cell_size,
            ncols,
            nrows,
            nodata,
            values,
        })
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Raw stored value, including the nodata sentinel.
    pub fn raw(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    /// Elevation at a cell, `None` for nodata.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.raw(row, col);
        (v != self.nodata && v.is_finite()).then_some(v)
    }

    /// Cell containing `p`, if it lies within the grid extent.
    pub fn cell_of(&self, p: GeoPoint) -> Option<(usize, usize)> {
        let c = ((p.lon() - self.origin.lon()) / self.cell_size).round();
        let r = ((p.lat() - self.origin.lat()) / self.cell_size).round();
        if c < 0.0 || r < 0.0 || c >= self.ncols as f64 || r >= self.nrows as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    /// Latitude of the center of `row`.
    pub fn row_lat(&self, row: usize) -> f64 {
        self.origin.lat() + row as f64 * self.cell_size
    }
}

pub fn load_dem_ascii_grid(path: impl AsRef<Path>) -> Result<Loaded<DemGrid>> {
    let path = path.as_ref();
    parse_dem_ascii_grid(&read_to_string(path)?, &path.display().to_string())
}

/// Parses an ESRI ASCII grid. Header keys are case-insensitive; both the
/// `xllcorner` and `xllcenter` conventions are accepted. A missing
/// `NODATA_value` defaults to -9999.
pub fn parse_dem_ascii_grid(text: &str, source_name: &str) -> Result<Loaded<DemGrid>> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll: Option<(f64, bool)> = None;
    let mut yll: Option<(f64, bool)> = None;
    let mut cellsize = None;
    let mut nodata = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(lineno, line)) = lines.peek() {
        let mut toks = line.split_whitespace();
        let Some(key) = toks.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() {
            break;
        }
        let value = toks
            .next()
            .ok_or_else(|| Error::parse(source_name, lineno + 1, format!("header key {key} has no value")))?;
        let num: f64 = value
            .parse()
            .map_err(|_| Error::parse(source_name, lineno + 1, format!("bad header value {value:?}")))?;
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(num),
            "nrows" => nrows = Some(num),
            "xllcorner" => xll = Some((num, false)),
            "xllcenter" => xll = Some((num, true)),
            "yllcorner" => yll = Some((num, false)),
            "yllcenter" => yll = Some((num, true)),
            "cellsize" => cellsize = Some(num),
            "nodata_value" => nodata = Some(num),
            other => return Err(Error::parse(source_name, lineno + 1, format!("unknown header key {other:?}"))),
        }
        lines.next();
    }

    let missing = |k: &str| Error::parse(source_name, 1, format!("missing header key {k}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let (x, x_center) = xll.ok_or_else(|| missing("xllcorner"))?;
    let (y, y_center) = yll.ok_or_else(|| missing("yllcorner"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let nodata = nodata.unwrap_or(-9999.0);
    if ncols < 1.0 || nrows < 1.0 || ncols.fract() != 0.0 || nrows.fract() != 0.0 {
        return Err(Error::parse(source_name, 1, "ncols and nrows must be positive integers"));
    }
    let (ncols, nrows) = (ncols as usize, nrows as usize);

    let mut file_rows: Vec<f64> = Vec::with_capacity(ncols * nrows);
    for (lineno, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(source_name, lineno + 1, format!("bad value {tok:?}")))?;
            file_rows.push(v);
        }
    }
    if file_rows.len() != ncols * nrows {
        return Err(Error::parse(
            source_name,
            text.lines().count(),
            format!("expected {} values, found {}", ncols * nrows, file_rows.len()),
        ));
    }
    // file order is north to south
    let mut values = Vec::with_capacity(file_rows.len());
    for r in (0..nrows).rev() {
        values.extend_from_slice(&file_rows[r * ncols..(r + 1) * ncols]);
    }
    let half = cellsize / 2.0;
    let origin_lon = if x_center { x } else { x + half };
    let origin_lat = if y_center { y } else { y + half };
    let origin = GeoPoint::new(origin_lon, origin_lat).map_err(|e| Error::parse(source_name, 1, e.to_string()))?;
    let grid = DemGrid::new(origin, cellsize, ncols, nrows, nodata, values)
        .map_err(|e| Error::parse(source_name, 1, e.to_string()))?;
    Ok(Loaded::new(grid, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grid() {
        let g = parse_dem_ascii_grid(
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 0.5\nNODATA_value -9999\n0 0\n0 0\n",
            "t",
        )
        .unwrap()
        .value;
        assert_eq!(g.values(), &[0.0; 4]);
        assert_eq!(g.origin(), GeoPoint::new(0.25, 0.25).unwrap());
    }

    #[test]
    fn rows_are_flipped_to_south_first_and_nodata_kept() {
        let g = parse_dem_ascii_grid(
            "NCOLS 2\nNROWS 2\nXLLCENTER 10\nYLLCENTER 20\nCELLSIZE 1\nNODATA_VALUE -1\n1 2\n-1 4\n",
            "t",
        )
        .unwrap()
        .value;
        assert_eq!(g.raw(0, 0), -1.0);
        assert_eq!(g.get(0, 0), None);
        assert_eq!(g.get(0, 1), Some(4.0));
        assert_eq!(g.get(1, 0), Some(1.0));
        assert_eq!(g.cell_of(GeoPoint::new(11.2, 21.0).unwrap()), Some((1, 1)));
        assert_eq!(g.cell_of(GeoPoint::new(12.0, 21.0).unwrap()), None);
    }

    #[test]
    fn missing_header_key() {
        let err = parse_dem_ascii_grid("nrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n5\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn value_count_mismatch() {
        let err = parse_dem_ascii_grid("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n", "t").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }
}
