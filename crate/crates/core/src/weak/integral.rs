use image::GrayImage;

/// Summed-area table with a zero guard row and column.
///
/// Sums are held in `f64`, which is exact for 8-bit inputs up to 2^45 pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    cumulative: Vec<f64>,
}

impl IntegralImage {
    /// Builds from `width * height` row-major intensities. Panics on an empty image.
    pub fn from_values(width: u32, height: u32, pixels: &[f64]) -> Self {
        assert!(width > 0 && height > 0, "integral image of an empty raster");
        assert_eq!(pixels.len(), (width * height) as usize);
        let stride = width as usize + 1;
        let mut cumulative = vec![0.0; stride * (height as usize + 1)];
        for y in 0..height as usize {
            let mut row_sum = 0.0;
            for x in 0..width as usize {
                row_sum += pixels[y * width as usize + x];
                cumulative[(y + 1) * stride + x + 1] = cumulative[y * stride + x + 1] + row_sum;
            }
        }
        Self { width, height, cumulative }
    }

    pub fn from_gray(img: &GrayImage) -> Self {
        let pixels: Vec<f64> = img.as_raw().iter().map(|&p| p as f64).collect();
        Self::from_values(img.width(), img.height(), &pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Cumulative sum of all pixels with coordinates `< (x, y)`.
    #[inline]
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.cumulative[y as usize * (self.width as usize + 1) + x as usize]
    }

    /// Sum of the `w x h` rectangle with top-left corner `(x, y)`; four lookups.
    #[inline]
    pub fn rect_sum(&self, x: u32, y: u32, w: u32, h: u32) -> f64 {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        self.at(x + w, y + h) - self.at(x, y + h) - self.at(x + w, y) + self.at(x, y)
    }
}
