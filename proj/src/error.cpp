#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

void throw_config(const std::string &what) { throw Error(ErrorKind::kConfig, what); }
void throw_data(const std::string &what) { throw Error(ErrorKind::kData, what); }
void throw_numerical(const std::string &what) { throw Error(ErrorKind::kNumerical, what); }

}  // namespace pgdcrnn
