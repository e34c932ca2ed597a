use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::ffi::CString;
use vemflux_py::vemflux_py;

#[test]
fn module_round_trip() {
    pyo3::append_to_inittab!(vemflux_py);
    Python::attach(|py| {
        let code = CString::new(include_str!("../../../python/smoke_test.py")).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("__name__", "__main__").unwrap();
        py.run(&code, Some(&globals), None).unwrap();
    });
}
