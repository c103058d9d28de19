#include "abc/exchange.hpp"
#include "abc/maps.hpp"

#include <stdexcept>

namespace abc {

TorusMap map_from_json(const Json& j) {
    const std::string type = j.at("type").get<std::string>();
    TorusMap m;
    if (type == "identity") {
        m = identity_map();
    } else if (type == "translation") {
        m = translation(Rational::parse(j.at("tx").get<std::string>()), Rational::parse(j.at("ty").get<std::string>()));
    } else if (type == "twist") {
        m = quarter_turn(j.at("eps").get<double>());
    } else if (type == "shear_x") {
        m = shear_x(j.at("c").get<std::int64_t>());
    } else if (type == "block") {
        const auto& c = j.at("chart");
        const auto& r = j.at("region");
        AffineChart chart{c[0].get<double>(), c[1].get<double>(), c[2].get<double>(), c[3].get<double>()};
        Rect region{r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
        m = block_conjugate(map_from_json(j.at("inner")), chart, region, Rational(1, j.at("periods").get<std::int64_t>()));
    } else if (type == "kappa") {
        const auto& p = j.at("profile");
        KappaProfile k;
        k.periods = p.at("periods").get<std::int64_t>();
        k.rise_end = p.at("rise_end").get<double>();
        k.fall_end = p.at("fall_end").get<double>();
        k.peak = p.at("peak").get<double>();
        k.smoothing = p.at("smoothing").get<double>();
        m = build_P(k);
    } else if (type == "compose") {
        std::vector<TorusMap> f;
        for (const auto& e : j.at("factors")) f.push_back(map_from_json(e));
        m = compose_all(f);
    } else if (type == "exchange") {
        m = exchange_to_map(std::make_shared<const RectExchange>(RectExchange::from_json(j.at("exchange"))));
    } else {
        throw std::invalid_argument("unknown map type '" + type + "'");
    }
    if (j.value("inverted", false)) m = m.inverse();
    if (j.contains("label")) m = m.labelled(j.at("label").get<std::string>());
    return m;
}

}  // namespace abc
