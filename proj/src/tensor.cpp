#include "polypgen/tensor.hpp"

#include <vector>

namespace polypgen {

int count_components(const BinaryMask& m) {
    std::vector<std::uint8_t> seen(m.size(), 0);
    std::vector<std::size_t> stack;
    int components = 0;
    for (std::size_t start = 0; start < m.size(); ++start) {
        if (!m.data[start] || seen[start]) continue;
        ++components;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int y = static_cast<int>(p / m.width);
            const int x = static_cast<int>(p % m.width);
            const int ny[4] = {y - 1, y + 1, y, y};
            const int nx[4] = {x, x, x - 1, x + 1};
            for (int k = 0; k < 4; ++k) {
                if (ny[k] < 0 || ny[k] >= m.height || nx[k] < 0 || nx[k] >= m.width) continue;
                const std::size_t q = static_cast<std::size_t>(ny[k]) * m.width + nx[k];
                if (m.data[q] && !seen[q]) {
                    seen[q] = 1;
                    stack.push_back(q);
                }
            }
        }
    }
    return components;
}

}  // namespace polypgen
