use super::TransformError;
use crate::imagecore::PlanarF64;

/// Tiling of the largest top-left region of a plane divisible by `block_size`.
/// Blocks are indexed row-major; the right/bottom margins are never touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub block_size: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub plane_width: usize,
    pub plane_height: usize,
}

impl BlockGrid {
    pub fn new(plane_width: usize, plane_height: usize, block_size: usize) -> Result<Self, TransformError> {
        if block_size != 4 && block_size != 8 {
            return Err(TransformError::BadBlockSize(block_size));
        }
        Ok(Self {
            block_size,
            blocks_x: plane_width / block_size,
            blocks_y: plane_height / block_size,
            plane_width,
            plane_height,
        })
    }

    pub fn for_plane(plane: &PlanarF64, block_size: usize) -> Result<Self, TransformError> {
        Self::new(plane.width, plane.height, block_size)
    }

    pub fn len(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn origin(&self, index: usize) -> (usize, usize) {
        ((index % self.blocks_x) * self.block_size, (index / self.blocks_x) * self.block_size)
    }

    pub fn read(&self, plane: &PlanarF64, index: usize) -> Vec<f64> {
        let (x0, y0) = self.origin(index);
        let n = self.block_size;
        let mut tile = Vec::with_capacity(n * n);
        for y in 0..n {
            let row = (y0 + y) * plane.width + x0;
            tile.extend_from_slice(&plane.data[row..row + n]);
        }
        tile
    }

    pub fn write(&self, plane: &mut PlanarF64, index: usize, tile: &[f64]) {
        let (x0, y0) = self.origin(index);
        let n = self.block_size;
        for y in 0..n {
            let row = (y0 + y) * plane.width + x0;
            plane.data[row..row + n].copy_from_slice(&tile[y * n..(y + 1) * n]);
        }
    }
}
