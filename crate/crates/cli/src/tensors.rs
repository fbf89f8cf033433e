//! NPY and PGM output of range-image stacks.

use std::path::{Path, PathBuf};

use lrt_core::io::{write_file, write_preview_pgm, write_tensor, NpyArray, NpyData};
use lrt_core::{Grid, LabelImage, RangeImageStack, Result};

pub fn f4(grid: &Grid<f64>) -> NpyArray {
    NpyArray {
        shape: vec![grid.height(), grid.width()],
        data: NpyData::F4(grid.iter().map(|&x| x as f32).collect()),
    }
}

pub fn vec3(grid: &Grid<[f64; 3]>) -> NpyArray {
    NpyArray {
        shape: vec![grid.height(), grid.width(), 3],
        data: NpyData::F4(grid.iter().flatten().map(|&x| x as f32).collect()),
    }
}

pub fn u1(grid: &Grid<u8>) -> NpyArray {
    NpyArray {
        shape: vec![grid.height(), grid.width()],
        data: NpyData::U1(grid.as_slice().to_vec()),
    }
}

pub fn i4<T: Copy + TryInto<i32>>(grid: &Grid<T>) -> NpyArray {
    NpyArray {
        shape: vec![grid.height(), grid.width()],
        data: NpyData::I4(
            grid.iter()
                .map(|&x| x.try_into().unwrap_or(i32::MAX))
                .collect(),
        ),
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| lrt_core::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Writes the projection tensors and returns the written paths.
pub fn write_stack(dir: &Path, stack: &RangeImageStack, labels: Option<&LabelImage>) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut files = vec![
        ("range", f4(&stack.range)),
        ("reflectivity", f4(&stack.reflectivity)),
        ("mask", u1(&stack.mask)),
        ("coords", vec3(&stack.coords)),
        ("index", i4(&stack.index)),
    ];
    if let Some(l) = labels {
        files.push(("labels", i4(l.labels())));
    }
    let mut written = Vec::new();
    for (name, array) in files {
        let path = dir.join(format!("{name}.npy"));
        write_tensor(&array, &path)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_npy(dir: &Path, name: &str, array: &NpyArray) -> Result<()> {
    write_tensor(array, &dir.join(format!("{name}.npy")))
}

pub fn write_pgm(dir: &Path, name: &str, grid: &Grid<f64>) -> Result<()> {
    write_preview_pgm(grid, &dir.join(format!("{name}.pgm")))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, text.as_bytes())
}
