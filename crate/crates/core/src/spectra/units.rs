//! Unit conversions between wavenumbers, frequencies and vacuum wavelengths.
//!
//! Energies are carried in cm⁻¹ and only converted to Hz at computation
//! boundaries, always through the defined speed of light.

use super::SpectraError;

/// Speed of light in vacuum, cm/s (exact by definition of the metre).
pub const SPEED_OF_LIGHT_CM_S: f64 = 2.997_924_58e10;

/// Speed of light in vacuum, nm/s.
pub const SPEED_OF_LIGHT_NM_S: f64 = 2.997_924_58e17;

/// Converts a wavenumber in cm⁻¹ to a frequency in Hz.
pub fn wavenumber_to_frequency(wavenumber_cm1: f64) -> Result<f64, SpectraError> {
    if !wavenumber_cm1.is_finite() {
        return Err(SpectraError::NonFinite(wavenumber_cm1));
    }
    Ok(wavenumber_cm1 * SPEED_OF_LIGHT_CM_S)
}

/// Vacuum wavelength in nm of radiation at `frequency_hz`.
pub fn vacuum_wavelength(frequency_hz: f64) -> Result<f64, SpectraError> {
    if !(frequency_hz > 0.0) || !frequency_hz.is_finite() {
        return Err(SpectraError::NonPositiveFrequency(frequency_hz));
    }
    Ok(SPEED_OF_LIGHT_NM_S / frequency_hz)
}

/// Frequency in Hz of radiation with vacuum wavelength `wavelength_nm`.
pub fn frequency_from_wavelength(wavelength_nm: f64) -> Result<f64, SpectraError> {
    if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
        return Err(SpectraError::NonPositiveFrequency(wavelength_nm));
    }
    Ok(SPEED_OF_LIGHT_NM_S / wavelength_nm)
}
