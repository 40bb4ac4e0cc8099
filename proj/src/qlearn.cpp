// Copyright 2026 The bidlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bidlab/qlearn.hpp"

#include <ostream>

#include "bidlab/format.hpp"

namespace bidlab {

void write_q_table_csv(std::ostream& out, const QTable& q) {
  out << "state,action,value\n";
  for (int s = 0; s < q.num_states(); ++s) {
    for (int a = 0; a < q.num_actions(); ++a) {
      out << s << ',' << a << ',' << format_double(q.values(s, a)) << '\n';
    }
  }
}

}  // namespace bidlab
