//! BIFR frame files: a 21-byte header followed by raw 16-bit frames.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "BIFR"
//!      4     1  format version (1)
//!      5     2  width, u16 LE
//!      7     2  height, u16 LE
//!      9     4  frame count, u32 LE
//!     13     1  bits per pixel (16)
//!     14     7  reserved, zero
//!     21        frames, row-major u16 LE pixels
//! ```

use std::io::{self, Read, Seek, SeekFrom, Write};

use thiserror::Error;
use twophoton_core::sensor::Frame;

pub const MAGIC: [u8; 4] = *b"BIFR";
pub const VERSION: u8 = 1;
pub const BITS_PER_PIXEL: u8 = 16;
pub const HEADER_LEN: u64 = 21;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at byte 0: expected \"BIFR\", found {found:02x?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported format version {found} at byte 4")]
    Version { found: u8 },

    #[error("unsupported bits per pixel {found} at byte 13")]
    BitsPerPixel { found: u8 },

    #[error("reserved byte {offset} is {value:#04x}, expected zero")]
    Reserved { offset: u64, value: u8 },

    #[error("zero width or height in header at byte 5")]
    EmptyFrame,

    #[error("file ends at byte {offset}, inside frame {frame} (needs {needed} more bytes)")]
    Truncated {
        offset: u64,
        frame: u64,
        needed: u64,
    },

    #[error("header ends early at byte {offset}")]
    ShortHeader { offset: u64 },

    #[error("frame {frame} is {width}x{height}, file holds {expected_width}x{expected_height}")]
    FrameShape {
        frame: u64,
        width: usize,
        height: usize,
        expected_width: u16,
        expected_height: u16,
    },

    #[error("wrote {written} frames, header promises {promised}")]
    FrameCount { written: u64, promised: u32 },

    #[error("I/O error at byte {offset}: {source}")]
    Io { offset: u64, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub width: u16,
    pub height: u16,
    pub frames: u32,
}

impl Header {
    pub fn frame_bytes(&self) -> u64 {
        self.width as u64 * self.height as u64 * 2
    }

    pub fn file_len(&self) -> u64 {
        HEADER_LEN + self.frames as u64 * self.frame_bytes()
    }

    pub fn frame_offset(&self, index: u64) -> u64 {
        HEADER_LEN + index * self.frame_bytes()
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..4].copy_from_slice(&MAGIC);
        b[4] = VERSION;
        b[5..7].copy_from_slice(&self.width.to_le_bytes());
        b[7..9].copy_from_slice(&self.height.to_le_bytes());
        b[9..13].copy_from_slice(&self.frames.to_le_bytes());
        b[13] = BITS_PER_PIXEL;
        b
    }

    pub fn parse(b: &[u8; HEADER_LEN as usize]) -> Result<Self, FormatError> {
        let magic = [b[0], b[1], b[2], b[3]];
        if magic != MAGIC {
            return Err(FormatError::BadMagic { found: magic });
        }
        if b[4] != VERSION {
            return Err(FormatError::Version { found: b[4] });
        }
        if b[13] != BITS_PER_PIXEL {
            return Err(FormatError::BitsPerPixel { found: b[13] });
        }
        if let Some(k) = (14..21).find(|&k| b[k] != 0) {
            return Err(FormatError::Reserved {
                offset: k as u64,
                value: b[k],
            });
        }
        let header = Header {
            width: u16::from_le_bytes([b[5], b[6]]),
            height: u16::from_le_bytes([b[7], b[8]]),
            frames: u32::from_le_bytes([b[9], b[10], b[11], b[12]]),
        };
        if header.width == 0 || header.height == 0 {
            return Err(FormatError::EmptyFrame);
        }
        Ok(header)
    }
}

/// Reads exactly `buf.len()` bytes, reporting how far it got on a short read.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<usize, FormatError> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(source) => {
                return Err(FormatError::Io {
                    offset: offset + got as u64,
                    source,
                })
            }
        }
    }
    Ok(got)
}

pub struct BifrWriter<W: Write> {
    inner: W,
    header: Header,
    written: u64,
    buf: Vec<u8>,
}

impl<W: Write> BifrWriter<W> {
    pub fn new(mut inner: W, header: Header) -> Result<Self, FormatError> {
        if header.width == 0 || header.height == 0 {
            return Err(FormatError::EmptyFrame);
        }
        inner
            .write_all(&header.to_bytes())
            .map_err(|source| FormatError::Io { offset: 0, source })?;
        Ok(Self {
            inner,
            header,
            written: 0,
            buf: Vec::with_capacity(header.frame_bytes() as usize),
        })
    }

    pub fn header(&self) -> Header {
        self.header
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<(), FormatError> {
        if frame.width() != self.header.width as usize
            || frame.height() != self.header.height as usize
        {
            return Err(FormatError::FrameShape {
                frame: self.written,
                width: frame.width(),
                height: frame.height(),
                expected_width: self.header.width,
                expected_height: self.header.height,
            });
        }
        if self.written >= self.header.frames as u64 {
            return Err(FormatError::FrameCount {
                written: self.written + 1,
                promised: self.header.frames,
            });
        }
        self.buf.clear();
        self.buf
            .extend(frame.data().iter().flat_map(|v| v.to_le_bytes()));
        let offset = self.header.frame_offset(self.written);
        self.inner
            .write_all(&self.buf)
            .map_err(|source| FormatError::Io { offset, source })?;
        self.written += 1;
        Ok(())
    }

    /// Checks the frame count against the header and flushes.
    pub fn finish(mut self) -> Result<W, FormatError> {
        if self.written != self.header.frames as u64 {
            return Err(FormatError::FrameCount {
                written: self.written,
                promised: self.header.frames,
            });
        }
        let offset = self.header.file_len();
        self.inner
            .flush()
            .map_err(|source| FormatError::Io { offset, source })?;
        Ok(self.inner)
    }
}

pub struct BifrReader<R: Read> {
    inner: R,
    header: Header,
    next: u64,
    buf: Vec<u8>,
}

impl<R: Read> BifrReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FormatError> {
        let mut b = [0u8; HEADER_LEN as usize];
        let got = read_full(&mut inner, &mut b, 0)?;
        if got < b.len() {
            return Err(FormatError::ShortHeader { offset: got as u64 });
        }
        let header = Header::parse(&b)?;
        Ok(Self {
            inner,
            header,
            next: 0,
            buf: vec![0; header.frame_bytes() as usize],
        })
    }

    pub fn header(&self) -> Header {
        self.header
    }

    /// Index of the frame the next call to [`read_frame`](Self::read_frame) returns.
    pub fn position(&self) -> u64 {
        self.next
    }

    /// Next frame, or `None` once the header's frame count is reached.
    pub fn read_frame(&mut self) -> Result<Option<Frame>, FormatError> {
        if self.next >= self.header.frames as u64 {
            return Ok(None);
        }
        let offset = self.header.frame_offset(self.next);
        let got = read_full(&mut self.inner, &mut self.buf, offset)?;
        if got < self.buf.len() {
            return Err(FormatError::Truncated {
                offset: offset + got as u64,
                frame: self.next,
                needed: (self.buf.len() - got) as u64,
            });
        }
        let data = self
            .buf
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        self.next += 1;
        let frame = Frame::from_data(
            self.header.width as usize,
            self.header.height as usize,
            data,
        )
        .expect("buffer sized from the header");
        Ok(Some(frame))
    }
}

impl<R: Read + Seek> BifrReader<R> {
    /// Positions the reader so the next frame returned is `index`.
    pub fn seek_frame(&mut self, index: u64) -> Result<(), FormatError> {
        let offset = self.header.frame_offset(index);
        self.inner
            .seek(SeekFrom::Start(offset))
            .map_err(|source| FormatError::Io { offset, source })?;
        self.next = index;
        Ok(())
    }
}

impl<R: Read> Iterator for BifrReader<R> {
    type Item = Result<Frame, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_frame().transpose()
    }
}
