// Distributed under the MIT License.
// See LICENSE.txt for details.

int main() { return 0; }
