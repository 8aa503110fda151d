//! Shared helpers for the integration tests.
#![allow(dead_code)]

pub mod bitlist;
pub mod prims;

use std::path::PathBuf;

use acnkit::compiler::{compile_source, CodecPlan};
use acnkit::engine;
use acnkit::frontend::parse_value;
use acnkit::value::Value;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// A fixture schema pair, the type to compile, and the value files for it.
pub struct Case {
    pub asn: &'static str,
    pub acn: &'static str,
    pub type_name: &'static str,
    pub values: &'static [&'static str],
}

pub const CASES: &[Case] = &[
    Case {
        asn: "tc27.asn1",
        acn: "tc27.acn",
        type_name: "TC-2-7-DistrPhysicalDevCmds",
        values: &["cmds1.json", "cmds_single.json"],
    },
    Case {
        asn: "misc.asn1",
        acn: "misc.acn",
        type_name: "Reading",
        values: &["reading1.json", "reading2.json"],
    },
];

impl Case {
    pub fn plan(&self) -> CodecPlan {
        compile_source(&read_fixture(self.asn), &read_fixture(self.acn), self.type_name)
            .unwrap_or_else(|e| panic!("{}: {e}", self.type_name))
    }

    pub fn value(&self, plan: &CodecPlan, file: &str) -> Value {
        let v = parse_value(&read_fixture(&format!("values/{file}"))).unwrap();
        engine::coerce(plan, v).unwrap()
    }
}

pub fn tc27() -> CodecPlan {
    CASES[0].plan()
}

/// `(plan, value, file name)` for every fixture value.
pub fn fixture_values() -> Vec<(CodecPlan, Value, &'static str)> {
    let mut out = Vec::new();
    for case in CASES {
        let plan = case.plan();
        for file in case.values {
            let v = case.value(&plan, file);
            out.push((plan.clone(), v, *file));
        }
    }
    out
}

/// TC27 command list with the given `(device, proto, cmd)` entries.
pub fn tc27_value(cmds: &[(&str, i64, i64)]) -> Value {
    Value::record([(
        "physicalDevCmds",
        Value::List(
            cmds.iter()
                .map(|&(dev, p, c)| {
                    Value::record([
                        ("protoData", Value::variant(dev, Value::Int(p))),
                        ("cmdData", Value::variant(dev, Value::Int(c))),
                    ])
                })
                .collect(),
        ),
    )])
}

/// Checks how the TC27 plan wires its inserted fields to their consumers.
pub fn tc27_wiring(plan: &CodecPlan) -> Result<(), String> {
    use acnkit::codec::{Endianness, WordWidth};
    use acnkit::compiler::plan::{Binding, Determinant, FieldRole, ListSize};
    use acnkit::compiler::{AlignClass, NodeKind, SlotRef};

    macro_rules! ensure {
        ($cond:expr, $($msg:tt)*) => {
            if !$cond {
                return Err(format!($($msg)*));
            }
        };
    }
    const ID_SLOT: &str = "physicalDevCmds[].physicalDev-ID";

    let b = plan.bounds();
    ensure!((b.min_bits, b.max_bits, b.alignment) == (56, 1544, AlignClass::None), "plan bounds {b}");
    let NodeKind::Record { fields } = &plan.root.core().kind else {
        return Err("root is not a record".into());
    };
    ensure!(fields.len() == 2, "root has {} fields", fields.len());
    let n = &fields[0];
    ensure!(n.name == "n" && n.role == FieldRole::Inserted { slot: "n".into() }, "first field {:?}", n.role);
    ensure!(
        n.node.core().kind == NodeKind::ConstUInt { width: WordWidth::W32, endianness: Endianness::Big },
        "n is not a 32-bit big-endian word"
    );
    let cmds = &fields[1];
    ensure!(cmds.name == "physicalDevCmds" && cmds.role == FieldRole::Value, "second field {}", cmds.name);
    let list = cmds.node.core();
    let NodeKind::List { min_len, max_len, size, element } = &list.kind else {
        return Err("physicalDevCmds is not a list".into());
    };
    ensure!((*min_len, *max_len) == (1, 63), "list size {min_len}..{max_len}");
    ensure!(*size == ListSize::External { slot: SlotRef::Slot("n".into()) }, "list size comes from {size:?}");
    ensure!((list.bounds.min_bits, list.bounds.max_bits) == (24, 1512), "list bounds {}", list.bounds);

    let NodeKind::Record { fields } = &element.core().kind else {
        return Err("element is not a record".into());
    };
    let names: Vec<&str> = fields.iter().map(|f| f.name.as_str()).collect();
    ensure!(names == ["physicalDev-ID", "protoData", "cmdData"], "element fields {names:?}");
    ensure!(fields[0].role == FieldRole::Inserted { slot: ID_SLOT.into() }, "id role {:?}", fields[0].role);
    let NodeKind::Enumerated { items, repr } = &fields[0].node.core().kind else {
        return Err("id is not an enumeration".into());
    };
    let items: Vec<(&str, i64)> = items.iter().map(|i| (i.name.as_str(), i.value)).collect();
    ensure!(items == [("dev1", 1), ("dev2", 2)], "id items {items:?}");
    ensure!(
        repr.kind == NodeKind::ConstUInt { width: WordWidth::W8, endianness: Endianness::Big },
        "id repr {:?}",
        repr.kind
    );
    for (f, ty) in fields[1..].iter().zip(["ProtoData", "CmdData"]) {
        let NodeKind::Outlined { name, args, body } = &f.node.kind else {
            return Err(format!("{} is not outlined", f.name));
        };
        ensure!(*name == format!("{ty}__physicalDevCmds[].{}", f.name), "outlined name {name}");
        ensure!(
            *args == [Binding { param: "device".into(), arg: SlotRef::Slot(ID_SLOT.into()) }],
            "{name} args {args:?}"
        );
        let NodeKind::Variant { determinant, alternatives } = &body.core().kind else {
            return Err(format!("{name} body is not a variant"));
        };
        ensure!(
            *determinant == Determinant::Slot { slot: SlotRef::Param("device".into()) },
            "{name} determinant {determinant:?}"
        );
        ensure!(
            alternatives.len() == 1 && alternatives[0].name == "dev1" && alternatives[0].select == 1,
            "{name} alternatives"
        );
        ensure!(
            alternatives[0].node.core().kind == NodeKind::ConstrainedInt { min: 0, max: 255 },
            "{name} dev1 encoding"
        );
    }
    Ok(())
}

/// Exact sizes at offsets `0..64` stay inside the static bounds and depend
/// on the offset only through the declared alignment modulus.
pub fn check_bounds(plan: &CodecPlan, v: &Value) -> Result<(), String> {
    let b = plan.bounds();
    let m = b.alignment.modulus().unwrap_or(1);
    let sizes: Vec<u64> = (0..64)
        .map(|o| engine::size_of(plan, v, o).map_err(|e| format!("size at offset {o}: {e}")))
        .collect::<Result<_, _>>()?;
    for (o, &s) in sizes.iter().enumerate() {
        if s < b.min_bits || s > b.max_bits {
            return Err(format!("size {s} at offset {o} outside {b}"));
        }
        let base = sizes[o % m as usize];
        if s != base {
            return Err(format!("size {s} at offset {o} but {base} at offset {} under {b}", o as u64 % m));
        }
    }
    Ok(())
}

/// Runs the CLI in-process; returns the exit code, stdout and stderr.
pub fn cli<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> (i32, String, String) {
    let mut argv: Vec<std::ffi::OsString> = vec!["acnkit".into()];
    argv.extend(args.iter().map(|a| a.as_ref().to_owned()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = acnkit::cli::run_with(argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
}

/// compile → encode → decode over every fixture value at `offset`,
/// comparing the decoded value with the input. Returns the encoded
/// messages so callers can compare runs.
pub fn cli_pipeline(dir: &std::path::Path, offset: u64) -> Result<Vec<Vec<u8>>, String> {
    let mut messages = Vec::new();
    for case in CASES {
        let plan_file = dir.join(format!("{}.plan.json", case.type_name));
        let (code, _, err) = cli(&[
            std::ffi::OsStr::new("compile"),
            fixture(case.asn).as_os_str(),
            fixture(case.acn).as_os_str(),
            "--type".as_ref(),
            case.type_name.as_ref(),
            "--out".as_ref(),
            plan_file.as_os_str(),
        ]);
        if code != 0 {
            return Err(format!("compile {}: exit {code}: {err}", case.type_name));
        }
        let plan = case.plan();
        for file in case.values {
            let msg = dir.join(format!("{file}.{offset}.bin"));
            let back = dir.join(format!("{file}.{offset}.out.json"));
            let value_file = fixture(&format!("values/{file}"));
            let off = offset.to_string();
            let (code, _, err) = cli(&[
                std::ffi::OsStr::new("encode"),
                "--plan".as_ref(),
                plan_file.as_os_str(),
                "--value".as_ref(),
                value_file.as_os_str(),
                "--out".as_ref(),
                msg.as_os_str(),
                "--offset".as_ref(),
                off.as_ref(),
            ]);
            if code != 0 {
                return Err(format!("encode {file}: exit {code}: {err}"));
            }
            let (code, _, err) = cli(&[
                std::ffi::OsStr::new("decode"),
                "--plan".as_ref(),
                plan_file.as_os_str(),
                "--in".as_ref(),
                msg.as_os_str(),
                "--out".as_ref(),
                back.as_os_str(),
            ]);
            if code != 0 {
                return Err(format!("decode {file}: exit {code}: {err}"));
            }
            let text = std::fs::read_to_string(&back).map_err(|e| e.to_string())?;
            let decoded = engine::coerce(&plan, parse_value(&text).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let want = case.value(&plan, file);
            if decoded != want {
                return Err(format!("{file} at offset {offset}: decoded {decoded}, expected {want}"));
            }
            messages.push(std::fs::read(&msg).map_err(|e| e.to_string())?);
        }
    }
    Ok(messages)
}
