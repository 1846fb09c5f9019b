//! Text rendering of JSON records: one `key: value` line per scalar field,
//! nested records indented, lists of records as `-` items.

use serde_json::Value;

pub fn render_text(record: &Value) -> String {
    let mut out = String::new();
    match record {
        Value::Object(_) => object(&mut out, record, 0),
        other => {
            out.push_str(&scalar(other));
            out.push('\n');
        }
    }
    out
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Object(_) | Value::Array(_))
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "none".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn object(out: &mut String, v: &Value, indent: usize) {
    let Value::Object(fields) = v else { return };
    let pad = " ".repeat(indent);
    for (key, value) in fields {
        match value {
            Value::Array(items) if items.is_empty() => out.push_str(&format!("{pad}{key}: (none)\n")),
            Value::Array(items) if items.iter().all(is_scalar) => {
                let joined: Vec<String> = items.iter().map(scalar).collect();
                out.push_str(&format!("{pad}{key}: {}\n", joined.join("; ")));
            }
            Value::Array(items) => {
                out.push_str(&format!("{pad}{key}:\n"));
                for item in items {
                    item_lines(out, item, indent + 2);
                }
            }
            Value::Object(inner) if inner.is_empty() => out.push_str(&format!("{pad}{key}: (none)\n")),
            Value::Object(_) => {
                out.push_str(&format!("{pad}{key}:\n"));
                object(out, value, indent + 2);
            }
            _ => out.push_str(&format!("{pad}{key}: {}\n", scalar(value))),
        }
    }
}

fn item_lines(out: &mut String, item: &Value, indent: usize) {
    let pad = " ".repeat(indent);
    if is_scalar(item) {
        out.push_str(&format!("{pad}- {}\n", scalar(item)));
        return;
    }
    let mut nested = String::new();
    match item {
        Value::Object(_) => object(&mut nested, item, indent + 2),
        _ => {
            for inner in item.as_array().into_iter().flatten() {
                item_lines(&mut nested, inner, indent + 2);
            }
        }
    }
    let mut lines = nested.lines();
    if let Some(first) = lines.next() {
        out.push_str(&format!("{pad}- {}\n", first.trim_start()));
    }
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
}
