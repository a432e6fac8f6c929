#pragma once

#include <iosfwd>
#include <string>

#include "longdr/synth/dgp.hpp"

namespace longdr::synth {

// One JSON object per line: a header {"tau","d","y_min","y_max","seed","variant"}
// followed by {"id","split","L","A","Y"} per unit. Reals use %.17g.
void write_dataset(std::ostream& out, const Dataset& ds);
void write_dataset(const std::string& path, const Dataset& ds);

// Throws ParseError whose where() names the line and field.
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);

// %.17g, with non-finite values rejected.
std::string format_real(double x);

} // namespace longdr::synth
