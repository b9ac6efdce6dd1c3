//! Minimal classic pcap file support: microsecond timestamps, link type
//! Ethernet. Both byte orders are read; files are written little-endian.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC_LE: u32 = 0xa1b2c3d4;
const LINKTYPE_ETHERNET: u32 = 1;
const SNAPLEN: u32 = 65535;

/// One captured frame with its microsecond timestamp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CapturedPacket {
    pub timestamp_us: u64,
    pub data: Vec<u8>,
}

pub struct PcapWriter<W: Write> {
    w: W,
}

impl<W: Write> PcapWriter<W> {
    pub fn new(mut w: W) -> io::Result<Self> {
        w.write_all(&MAGIC_LE.to_le_bytes())?;
        w.write_all(&2u16.to_le_bytes())?; // version major
        w.write_all(&4u16.to_le_bytes())?; // version minor
        w.write_all(&0i32.to_le_bytes())?; // thiszone
        w.write_all(&0u32.to_le_bytes())?; // sigfigs
        w.write_all(&SNAPLEN.to_le_bytes())?;
        w.write_all(&LINKTYPE_ETHERNET.to_le_bytes())?;
        Ok(Self { w })
    }

    pub fn write_packet(&mut self, timestamp_us: u64, data: &[u8]) -> io::Result<()> {
        self.w.write_all(&((timestamp_us / 1_000_000) as u32).to_le_bytes())?;
        self.w.write_all(&((timestamp_us % 1_000_000) as u32).to_le_bytes())?;
        self.w.write_all(&(data.len() as u32).to_le_bytes())?;
        self.w.write_all(&(data.len() as u32).to_le_bytes())?;
        self.w.write_all(data)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.w.flush()
    }
}

pub struct PcapReader<R: Read> {
    r: R,
    swapped: bool,
}

fn bad_data(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut r: R) -> io::Result<Self> {
        let mut header = [0u8; 24];
        r.read_exact(&mut header)
            .map_err(|_| bad_data("pcap global header truncated"))?;
        let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
        let swapped = match magic {
            MAGIC_LE => false,
            m if m == MAGIC_LE.swap_bytes() => true,
            _ => return Err(bad_data("not a microsecond pcap file")),
        };
        Ok(Self { r, swapped })
    }

    fn u32_at(&self, bytes: &[u8]) -> u32 {
        let raw = u32::from_le_bytes(bytes.try_into().unwrap());
        if self.swapped {
            raw.swap_bytes()
        } else {
            raw
        }
    }

    /// Next record, `Ok(None)` at a clean end of file.
    pub fn next_packet(&mut self) -> io::Result<Option<CapturedPacket>> {
        let mut record = [0u8; 16];
        match self.r.read_exact(&mut record) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                // Distinguish clean EOF from a torn record header.
                return if record.iter().all(|&b| b == 0) {
                    Ok(None)
                } else {
                    Err(bad_data("pcap record header truncated"))
                };
            }
            Err(e) => return Err(e),
        }
        let ts_sec = self.u32_at(&record[0..4]);
        let ts_usec = self.u32_at(&record[4..8]);
        let incl_len = self.u32_at(&record[8..12]);
        if incl_len > SNAPLEN {
            return Err(bad_data("pcap record length exceeds snaplen"));
        }
        let mut data = vec![0u8; incl_len as usize];
        self.r
            .read_exact(&mut data)
            .map_err(|_| bad_data("pcap record body truncated"))?;
        Ok(Some(CapturedPacket {
            timestamp_us: u64::from(ts_sec) * 1_000_000 + u64::from(ts_usec),
            data,
        }))
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = io::Result<CapturedPacket>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_packet().transpose()
    }
}

pub fn read_pcap(path: &Path) -> io::Result<Vec<CapturedPacket>> {
    let reader = PcapReader::new(BufReader::new(File::open(path)?))?;
    reader.collect()
}

pub fn write_pcap(path: &Path, packets: &[CapturedPacket]) -> io::Result<()> {
    let mut writer = PcapWriter::new(BufWriter::new(File::create(path)?))?;
    for p in packets {
        writer.write_packet(p.timestamp_us, &p.data)?;
    }
    writer.flush()
}
