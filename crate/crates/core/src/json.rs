//! JSON output with every float printed as `{:.16e}`, so reports are
//! byte-stable across platforms and round-trip exactly.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter, Serializer};

pub struct Scientific<F>(pub F);

macro_rules! forward {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.0.$name(w)
        })*
    };
}

impl<F: Formatter> Formatter for Scientific<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    forward!(begin_array, end_array, begin_object, end_object, end_array_value, end_object_key, begin_object_value, end_object_value);

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
}

fn write<T: Serialize + ?Sized, F: Formatter>(value: &T, f: F) -> String {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, Scientific(f));
    value.serialize(&mut ser).expect("serializing to memory does not fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// Single-line JSON.
pub fn to_line<T: Serialize + ?Sized>(value: &T) -> String {
    write(value, CompactFormatter)
}

/// Indented JSON.
pub fn to_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    write(value, PrettyFormatter::with_indent(b"  "))
}
