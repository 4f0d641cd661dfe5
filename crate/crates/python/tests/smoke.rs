use std::ffi::CString;

use ion_heating_py::ion_heating_py;
use pyo3::prelude::*;

#[test]
fn python_smoke_test() {
    pyo3::append_to_inittab!(ion_heating_py);
    let source = include_str!("../python/smoke_test.py");
    let code = CString::new(source).unwrap();
    Python::attach(|py| {
        if let Err(e) = py.run(&code, None, None) {
            e.print(py);
            panic!("smoke test failed");
        }
    });
}
