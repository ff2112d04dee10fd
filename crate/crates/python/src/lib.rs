use pyo3::prelude::*;

#[pymodule]
fn rsma_isac_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
